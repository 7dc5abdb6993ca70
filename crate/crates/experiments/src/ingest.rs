//! Corner files: `pose_id,corner_row,corner_col,board_x,board_y,u,v`, one
//! row per corner, poses in order of first appearance.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Point2;
use pline_core::scene::Correspondence;
use pline_core::ObservationSet;

use crate::error::{ExperimentError, Result};

pub const HEADER: [&str; 7] = ["pose_id", "corner_row", "corner_col", "board_x", "board_y", "u", "v"];

fn parse_error(line: usize, pose: Option<&str>, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Parse {
        line,
        pose: pose.map(str::to_string),
        message: message.into(),
    }
}

/// Parses corner-file text. A header row is optional; blank lines and lines
/// starting with `#` are ignored.
pub fn parse_corner_csv(text: &str) -> Result<Vec<ObservationSet>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut sets: Vec<ObservationSet> = Vec::new();
    let mut first_line: Vec<usize> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.get(0) == Some(HEADER[0]) {
            continue;
        }
        let pose = record.get(0).unwrap_or_default();
        if record.len() != HEADER.len() {
            return Err(parse_error(
                line,
                Some(pose),
                format!("expected {} fields, found {}", HEADER.len(), record.len()),
            ));
        }
        let index = |k: usize| -> Result<usize> {
            record[k]
                .parse()
                .map_err(|_| parse_error(line, Some(pose), format!("{} {:?} is not a count", HEADER[k], &record[k])))
        };
        let number = |k: usize| -> Result<f64> {
            match record[k].parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(parse_error(line, Some(pose), format!("{} {:?} is not a finite number", HEADER[k], &record[k]))),
            }
        };
        let c = Correspondence {
            row: index(1)?,
            col: index(2)?,
            board: Point2::new(number(3)?, number(4)?),
            pixel: Point2::new(number(5)?, number(6)?),
        };
        match sets.iter_mut().position(|s| s.pose_id == pose) {
            Some(k) => {
                if sets[k].correspondences.iter().any(|o| (o.row, o.col) == (c.row, c.col)) {
                    return Err(parse_error(line, Some(pose), format!("corner ({}, {}) repeated", c.row, c.col)));
                }
                sets[k].correspondences.push(c);
            }
            None => {
                first_line.push(line);
                sets.push(ObservationSet {
                    pose_id: pose.to_string(),
                    correspondences: vec![c],
                    noise_sigma: None,
                    seed: None,
                });
            }
        }
    }
    if sets.is_empty() {
        return Err(parse_error(0, None, "no corners"));
    }
    for (set, line) in sets.iter().zip(&first_line) {
        if set.correspondences.len() < 4 {
            return Err(parse_error(
                *line,
                Some(&set.pose_id),
                format!("pose has {} corners, need at least 4", set.correspondences.len()),
            ));
        }
        set.validate()
            .map_err(|e| parse_error(*line, Some(&set.pose_id), e.to_string()))?;
    }
    check_board(&sets)?;
    Ok(sets)
}

/// Every pose must place a given corner id at the same board position.
fn check_board(sets: &[ObservationSet]) -> Result<()> {
    let mut positions: BTreeMap<(usize, usize), (Point2<f64>, &str)> = BTreeMap::new();
    for set in sets {
        for c in &set.correspondences {
            match positions.get(&(c.row, c.col)) {
                Some((p, owner)) if (p - c.board).norm() > 1e-9 * p.coords.norm().max(1.0) => {
                    return Err(ExperimentError::InconsistentBoard(format!(
                        "corner ({}, {}) is at {:?} in pose {} but {:?} in pose {}",
                        c.row, c.col, p, owner, c.board, set.pose_id
                    )));
                }
                Some(_) => {}
                None => {
                    positions.insert((c.row, c.col), (c.board, &set.pose_id));
                }
            }
        }
    }
    Ok(())
}

pub fn ingest_corner_file(path: &Path) -> Result<Vec<ObservationSet>> {
    parse_corner_csv(&std::fs::read_to_string(path)?)
}

/// Corner-file text. Numbers use the shortest decimal that parses back to
/// the same `f64`, so export followed by ingest is lossless.
pub fn corner_csv_string(sets: &[ObservationSet]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for set in sets {
        for c in &set.correspondences {
            w.write_record([
                set.pose_id.clone(),
                c.row.to_string(),
                c.col.to_string(),
                c.board.x.to_string(),
                c.board.y.to_string(),
                c.pixel.x.to_string(),
                c.pixel.y.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn export_corner_file(sets: &[ObservationSet], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, corner_csv_string(sets)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_pose(id: &str, shift: f64) -> String {
        let mut s = String::new();
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            s.push_str(&format!(
                "{id},{r},{c},{},{},{},{}\n",
                c as f64 * 10.0,
                r as f64 * 10.0,
                100.0 + c as f64 * 20.0 + shift,
                50.0 + r as f64 * 20.0
            ));
        }
        s
    }

    #[test]
    fn parses_with_and_without_header() {
        let body = square_pose("a", 0.0) + &square_pose("b", 3.0);
        let with = format!("{}\n{body}", HEADER.join(","));
        let sets = parse_corner_csv(&with).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[1].pose_id, "b");
        assert_eq!(sets[1].correspondences[3].pixel, Point2::new(123.0, 70.0));
        assert_eq!(sets[0].noise_sigma, None);
        assert_eq!(parse_corner_csv(&body).unwrap(), sets);
    }

    #[test]
    fn short_pose_names_the_pose() {
        let text = square_pose("a", 0.0) + "b,0,0,0,0,1,1\nb,0,1,10,0,2,1\nb,1,0,0,10,1,2\n";
        match parse_corner_csv(&text) {
            Err(ExperimentError::Parse { pose, line, .. }) => {
                assert_eq!(pose.as_deref(), Some("b"));
                assert_eq!(line, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = square_pose("a", 0.0).replace("120,50", "x,50");
        let err = parse_corner_csv(&text).unwrap_err();
        assert!(matches!(err, ExperimentError::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("line 2 (pose a)"));
    }

    #[test]
    fn disagreeing_boards_are_rejected() {
        let text = square_pose("a", 0.0) + &square_pose("b", 0.0).replacen("b,0,0,0,0", "b,0,0,5,0", 1);
        assert!(matches!(parse_corner_csv(&text), Err(ExperimentError::InconsistentBoard(_))));
    }

    #[test]
    fn export_round_trip_is_exact() {
        let mut sets = parse_corner_csv(&(square_pose("a", 0.1) + &square_pose("b", 1.0 / 3.0))).unwrap();
        sets[0].correspondences[0].pixel.x = std::f64::consts::PI * 100.0;
        let text = corner_csv_string(&sets).unwrap();
        assert_eq!(parse_corner_csv(&text).unwrap(), sets);
    }
}
