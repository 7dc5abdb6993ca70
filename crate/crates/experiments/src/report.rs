//! Report rows, summary statistics and CSV output.

use std::path::Path;

use nalgebra::Point2;

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};

pub const COLUMNS: [&str; 16] = [
    "experiment",
    "row_kind",
    "method",
    "translation_x",
    "translation_y",
    "n",
    "skip_start",
    "label",
    "u",
    "v",
    "error_px",
    "rms_px",
    "angle_deg",
    "offset_px",
    "status",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    Detail,
    Centroid,
    Mean,
    Std,
    Spread,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Detail => "detail",
            RowKind::Centroid => "centroid",
            RowKind::Mean => "mean",
            RowKind::Std => "std",
            RowKind::Spread => "spread",
        }
    }
}

/// One report line. Optional numbers are written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub row_kind: RowKind,
    pub method: String,
    pub translation: (f64, f64),
    pub n: Option<usize>,
    pub skip_start: Option<usize>,
    pub label: String,
    pub u: Option<f64>,
    pub v: Option<f64>,
    /// Distance of `(u, v)` from the true principal point.
    pub error_px: Option<f64>,
    pub rms_px: Option<f64>,
    pub angle_deg: Option<f64>,
    pub offset_px: Option<f64>,
    /// `ok`, or the error that stopped this cell.
    pub status: String,
    pub seed: u64,
}

impl Row {
    pub fn new(experiment: &str, row_kind: RowKind, method: &str, translation: (f64, f64), seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            row_kind,
            method: method.to_string(),
            translation,
            n: None,
            skip_start: None,
            label: String::new(),
            u: None,
            v: None,
            error_px: None,
            rms_px: None,
            angle_deg: None,
            offset_px: None,
            status: "ok".to_string(),
            seed,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn point(&self) -> Option<Point2<f64>> {
        match (self.u, self.v) {
            (Some(u), Some(v)) if self.is_ok() => Some(Point2::new(u, v)),
            _ => None,
        }
    }

    pub fn with_point(mut self, p: Point2<f64>, truth: Option<Point2<f64>>) -> Self {
        self.u = Some(p.x);
        self.v = Some(p.y);
        self.error_px = truth.map(|t| (p - t).norm());
        self
    }

    pub fn failed(mut self, err: impl std::fmt::Display) -> Self {
        // Keep cells single-line and comma-free for spreadsheet friendliness.
        self.status = format!("error: {err}").replace([',', '\n'], ";");
        self
    }

    fn group_key(&self) -> (String, String, u64, u64, u64) {
        (
            self.experiment.clone(),
            self.method.clone(),
            self.translation.0.to_bits(),
            self.translation.1.to_bits(),
            self.seed,
        )
    }

    fn cells(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_sig9).unwrap_or_default();
        let count = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.experiment.clone(),
            self.row_kind.as_str().to_string(),
            self.method.clone(),
            format_sig9(self.translation.0),
            format_sig9(self.translation.1),
            count(self.n),
            count(self.skip_start),
            self.label.clone(),
            opt(self.u),
            opt(self.v),
            opt(self.error_px),
            opt(self.rms_px),
            opt(self.angle_deg),
            opt(self.offset_px),
            self.status.clone(),
            self.seed.to_string(),
        ]
    }
}

/// Fixed-point decimal with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).clamp(0, 40) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit; one fewer decimal keeps 9.
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if digits > 9 && decimals > 0 {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Resolved configuration, embedded in the CSV header.
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            config: config.clone(),
            notes: vec![
                "translations are in board world units; pixel columns are in pixels".to_string(),
                "error_px is the distance from the true principal point of the synthetic camera".to_string(),
                "image size and square size are assumed defaults of the synthetic setup".to_string(),
            ],
            rows: Vec::new(),
        }
    }

    /// CSV bytes: `#` comment lines with the config and notes, then the
    /// header and rows. Summary rows are checked against the detail rows
    /// first.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        verify_summaries(&self.rows)?;
        let mut out = Vec::new();
        let mut header = format!("# experiment: {}\n", self.experiment);
        for line in self.config.to_toml_string().lines() {
            header.push_str(&format!("# config: {line}\n"));
        }
        for note in &self.notes {
            header.push_str(&format!("# note: {note}\n"));
        }
        out.extend_from_slice(header.as_bytes());
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(COLUMNS)?;
            for row in &self.rows {
                w.write_record(row.cells())?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

fn mean_point(points: &[Point2<f64>]) -> Point2<f64> {
    let n = points.len() as f64;
    Point2::new(
        points.iter().map(|p| p.x).sum::<f64>() / n,
        points.iter().map(|p| p.y).sum::<f64>() / n,
    )
}

/// Per-axis sample standard deviation (n − 1 denominator).
pub fn sample_std(points: &[Point2<f64>]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let m = mean_point(points);
    let d = (points.len() - 1) as f64;
    Some((
        (points.iter().map(|p| (p.x - m.x).powi(2)).sum::<f64>() / d).sqrt(),
        (points.iter().map(|p| (p.y - m.y).powi(2)).sum::<f64>() / d).sqrt(),
    ))
}

/// Group centroids per `n`, then mean and sample std of those centroids,
/// for every (method, translation, seed) group of detail rows.
pub fn skip_summaries(rows: &[Row], truth: Option<Point2<f64>>) -> Vec<Row> {
    let mut keys: Vec<_> = Vec::new();
    for r in rows.iter().filter(|r| r.row_kind == RowKind::Detail) {
        let k = r.group_key();
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::new();
    for key in keys {
        let group: Vec<&Row> = rows
            .iter()
            .filter(|r| r.row_kind == RowKind::Detail && r.group_key() == key)
            .collect();
        let first = group[0];
        let mut ns: Vec<usize> = group.iter().filter_map(|r| r.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let template = |kind| Row::new(&first.experiment, kind, &first.method, first.translation, first.seed);
        let mut centroids = Vec::new();
        for n in ns {
            let points: Vec<Point2<f64>> = group.iter().filter(|r| r.n == Some(n)).filter_map(|r| r.point()).collect();
            let mut row = template(RowKind::Centroid);
            row.n = Some(n);
            if points.is_empty() {
                out.push(row.failed("no successful estimates"));
                continue;
            }
            let c = mean_point(&points);
            centroids.push(c);
            out.push(row.with_point(c, truth));
        }
        let mean = template(RowKind::Mean);
        let std = template(RowKind::Std);
        if centroids.is_empty() {
            out.push(mean.failed("no centroids"));
        } else {
            out.push(mean.with_point(mean_point(&centroids), truth));
        }
        match sample_std(&centroids) {
            Some((sx, sy)) => {
                let mut std = std;
                std.u = Some(sx);
                std.v = Some(sy);
                out.push(std);
            }
            None => out.push(std.failed("fewer than two centroids")),
        }
    }
    out
}

/// Largest distance of the group's estimates from their centroid.
pub fn spread_row(group: &[Row], template: Row, truth: Option<Point2<f64>>) -> Row {
    let points: Vec<Point2<f64>> = group.iter().filter_map(|r| r.point()).collect();
    if points.is_empty() {
        return template.failed("no successful estimates");
    }
    let c = mean_point(&points);
    let spread = points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max);
    let mut row = template.with_point(c, truth);
    row.offset_px = Some(spread);
    row
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Recomputes every summary row from the rows it summarizes, using plain
/// running sums rather than the helpers above.
pub fn verify_summaries(rows: &[Row]) -> Result<()> {
    let mismatch = |row: &Row, what: &str| {
        Err(ExperimentError::SummaryMismatch(format!(
            "{} {} row (method {}, n {:?}, seed {}): {what}",
            row.experiment,
            row.row_kind.as_str(),
            row.method,
            row.n,
            row.seed
        )))
    };
    let same_group = |a: &Row, b: &Row| {
        a.experiment == b.experiment
            && a.method == b.method
            && a.translation.0.to_bits() == b.translation.0.to_bits()
            && a.translation.1.to_bits() == b.translation.1.to_bits()
            && a.seed == b.seed
    };
    let averages = |members: &mut dyn Iterator<Item = &Row>| {
        let (mut su, mut sv, mut count) = (0.0, 0.0, 0usize);
        let mut kept = Vec::new();
        for r in members {
            if let (Some(u), Some(v), true) = (r.u, r.v, r.is_ok()) {
                su += u;
                sv += v;
                count += 1;
                kept.push((u, v));
            }
        }
        (su / count as f64, sv / count as f64, kept)
    };

    for row in rows.iter().filter(|r| r.is_ok()) {
        match row.row_kind {
            RowKind::Detail => {}
            RowKind::Centroid => {
                let (mu, mv, kept) = averages(
                    &mut rows
                        .iter()
                        .filter(|r| r.row_kind == RowKind::Detail && same_group(r, row) && r.n == row.n),
                );
                if kept.is_empty() || !close(mu, row.u.unwrap_or(f64::NAN)) || !close(mv, row.v.unwrap_or(f64::NAN)) {
                    return mismatch(row, "centroid differs from its detail rows");
                }
            }
            RowKind::Mean | RowKind::Std => {
                let (mu, mv, kept) = averages(
                    &mut rows
                        .iter()
                        .filter(|r| r.row_kind == RowKind::Centroid && same_group(r, row)),
                );
                let (eu, ev) = if row.row_kind == RowKind::Mean {
                    (mu, mv)
                } else {
                    let d = kept.len() as f64 - 1.0;
                    let su = kept.iter().map(|(u, _)| (u - mu) * (u - mu)).sum::<f64>();
                    let sv = kept.iter().map(|(_, v)| (v - mv) * (v - mv)).sum::<f64>();
                    ((su / d).sqrt(), (sv / d).sqrt())
                };
                if kept.is_empty() || !close(eu, row.u.unwrap_or(f64::NAN)) || !close(ev, row.v.unwrap_or(f64::NAN)) {
                    return mismatch(row, "statistic differs from the centroid rows");
                }
            }
            RowKind::Spread => {
                let members: Vec<&Row> = rows
                    .iter()
                    .filter(|r| r.row_kind == RowKind::Detail && same_group(r, row) && r.n == row.n)
                    .collect();
                let (mu, mv, kept) = averages(&mut members.iter().copied());
                let spread = kept
                    .iter()
                    .map(|(u, v)| ((u - mu).powi(2) + (v - mv).powi(2)).sqrt())
                    .fold(0.0, f64::max);
                if kept.is_empty() || !close(spread, row.offset_px.unwrap_or(f64::NAN)) {
                    return mismatch(row, "spread differs from its detail rows");
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(960.0), "960.000000");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(-0.000123456789123), "-0.000123456789");
        assert_eq!(format_sig9(9.999999999), "10.0000000");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(123456789012.0), "123456789012");
    }

    fn detail(method: &str, n: usize, u: f64, v: f64) -> Row {
        let mut r = Row::new("skip", RowKind::Detail, method, (50.0, 0.0), 7).with_point(Point2::new(u, v), None);
        r.n = Some(n);
        r
    }

    #[test]
    fn summaries_match_hand_values() {
        let rows = vec![
            detail("pl", 0, 10.0, 20.0),
            detail("pl", 1, 11.0, 21.0),
            detail("pl", 1, 13.0, 19.0),
            detail("pl", 2, 9.0, 20.0),
        ];
        let s = skip_summaries(&rows, Some(Point2::new(10.0, 20.0)));
        assert_eq!(s.len(), 5);
        assert_eq!((s[1].u, s[1].v), (Some(12.0), Some(20.0)));
        // Centroids 10, 12, 9 in u: mean 31/3, squared deviations 14/3, sample std sqrt(7/3).
        assert!((s[3].u.unwrap() - 31.0 / 3.0).abs() < 1e-12);
        assert!((s[4].u.unwrap() - (7.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s[4].v, Some(0.0));
        let mut all = rows.clone();
        all.extend(s);
        verify_summaries(&all).unwrap();
    }

    #[test]
    fn tampered_summary_is_caught() {
        let rows = vec![detail("pl", 1, 1.0, 1.0), detail("pl", 1, 3.0, 1.0)];
        let mut all = rows.clone();
        let mut s = skip_summaries(&rows, None);
        s[0].u = Some(2.5);
        all.extend(s);
        assert!(matches!(verify_summaries(&all), Err(ExperimentError::SummaryMismatch(_))));
    }

    #[test]
    fn failed_rows_are_skipped_in_summaries() {
        let rows = vec![
            detail("pl", 1, 1.0, 1.0),
            detail("pl", 1, 3.0, 1.0),
            detail("pl", 1, 100.0, 100.0).failed("near parallel"),
        ];
        let s = skip_summaries(&rows, None);
        assert_eq!(s[0].u, Some(2.0));
        assert_eq!(s[0].n, Some(1));
        assert!(!s[2].is_ok(), "single centroid has no std");
    }

    #[test]
    fn csv_embeds_config_and_is_stable() {
        let config = ExperimentConfig::default();
        let mut report = ExperimentReport::new("skip", &config);
        report.rows.push(detail("pl", 1, 960.5, 540.25).failed("a, b\nc"));
        let a = report.to_csv_bytes().unwrap();
        assert_eq!(a, report.to_csv_bytes().unwrap());
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("# config: focal_length = 1600.0"));
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], COLUMNS.join(","));
        assert!(data[1].starts_with("skip,detail,pl,50.0000000,0,1,,,960.500000,540.250000,"));
        assert!(data[1].ends_with("error: a; b;c,7"));
    }
}
