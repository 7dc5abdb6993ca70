//! Scatter plots of skip-experiment principal points, one color per `n`.

use std::fmt::Write as _;

use nalgebra::Point2;

use crate::error::{ExperimentError, Result};
use crate::report::{ExperimentReport, RowKind};

/// Group colors for `n = 0, 1, …`; the full set is black.
pub const GROUP_COLORS: [&str; 6] = ["black", "purple", "green", "orange", "cyan", "red"];

const SIZE: f64 = 480.0;
const MARGIN: f64 = 64.0;

/// Which detail rows to plot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSelection {
    pub method: String,
    pub translation: Option<(f64, f64)>,
    pub seed: Option<u64>,
}

/// Plotted region in pixels, recorded in the SVG metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Square window around the points with 10% padding and at least 1 px
/// across.
fn window(points: &[Point2<f64>]) -> Window {
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let half = ((hi.x - lo.x).max(hi.y - lo.y) * 0.6).max(0.5);
    let c = Point2::new((lo.x + hi.x) / 2.0, (lo.y + hi.y) / 2.0);
    Window {
        u_min: c.x - half,
        u_max: c.x + half,
        v_min: c.y - half,
        v_max: c.y + half,
    }
}

/// Standalone SVG of the selected skip-experiment estimates. Image axes
/// keep their orientation: `v` grows downwards.
pub fn emit_svg_plot(report: &ExperimentReport, selection: &PlotSelection) -> Result<String> {
    let rows: Vec<_> = report
        .rows
        .iter()
        .filter(|r| {
            r.experiment == "skip"
                && r.row_kind == RowKind::Detail
                && r.method == selection.method
                && selection
                    .translation
                    .is_none_or(|t| t.0.to_bits() == r.translation.0.to_bits() && t.1.to_bits() == r.translation.1.to_bits())
                && selection.seed.is_none_or(|s| s == r.seed)
        })
        .filter_map(|r| Some((r.n?, r.point()?)))
        .collect();
    if rows.is_empty() {
        return Err(ExperimentError::EmptySelection);
    }
    let points: Vec<Point2<f64>> = rows.iter().map(|(_, p)| *p).collect();
    let w = window(&points);
    let scale = (SIZE - 2.0 * MARGIN) / (w.u_max - w.u_min);
    let x = |u: f64| MARGIN + (u - w.u_min) * scale;
    let y = |v: f64| MARGIN + (v - w.v_min) * scale;

    let mut ns: Vec<usize> = rows.iter().map(|(n, _)| *n).collect();
    ns.sort_unstable();
    ns.dedup();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(
        s,
        "<metadata>method={} translation={} seed={} window u=[{:.6}, {:.6}] v=[{:.6}, {:.6}]</metadata>",
        selection.method,
        selection.translation.map_or("all".to_string(), |t| format!("({}, {})", t.0, t.1)),
        selection.seed.map_or("all".to_string(), |v| v.to_string()),
        w.u_min,
        w.u_max,
        w.v_min,
        w.v_max
    );
    let _ = writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let (lo, hi) = (MARGIN, SIZE - MARGIN);
    let _ = writeln!(
        s,
        r#"<rect x="{lo}" y="{lo}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        hi - lo,
        hi - lo
    );
    let _ = writeln!(
        s,
        r#"<g font-family="sans-serif" font-size="11" fill="black">
<text x="{lo}" y="{:.1}" text-anchor="start">{:.3}</text>
<text x="{hi}" y="{:.1}" text-anchor="end">{:.3}</text>
<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>
<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>
<text x="{:.1}" y="{:.1}" text-anchor="middle">u (px)</text>
<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">v (px)</text>
</g>"#,
        hi + 16.0,
        w.u_min,
        hi + 16.0,
        w.u_max,
        lo - 4.0,
        lo + 4.0,
        w.v_min,
        lo - 4.0,
        hi,
        w.v_max,
        SIZE / 2.0,
        hi + 36.0,
        SIZE / 2.0,
        SIZE / 2.0
    );
    for &n in &ns {
        let color = GROUP_COLORS[n % GROUP_COLORS.len()];
        let radius = if n == 0 { 5.0 } else { 3.0 };
        let _ = writeln!(s, r#"<g id="n{n}" fill="{color}" fill-opacity="0.8">"#);
        for (_, p) in rows.iter().filter(|(m, _)| *m == n) {
            let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="{radius}"/>"#, x(p.x), y(p.y));
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g id="legend" font-family="sans-serif" font-size="11">"#);
    for (k, &n) in ns.iter().enumerate() {
        let color = GROUP_COLORS[n % GROUP_COLORS.len()];
        let ly = 16.0 + 14.0 * k as f64;
        let label = if n == 0 { "all poses".to_string() } else { format!("skip {n}") };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            SIZE - 90.0,
            ly - 4.0,
            SIZE - 80.0,
            ly
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use crate::report::Row;

    fn report_with(points: &[(usize, f64, f64)]) -> ExperimentReport {
        let mut report = ExperimentReport::new("skip", &ExperimentConfig::default());
        for &(n, u, v) in points {
            let mut r = Row::new("skip", RowKind::Detail, "pl", (50.0, 0.0), 1).with_point(Point2::new(u, v), None);
            r.n = Some(n);
            report.rows.push(r);
        }
        report
    }

    fn selection() -> PlotSelection {
        PlotSelection {
            method: "pl".into(),
            translation: None,
            seed: None,
        }
    }

    #[test]
    fn empty_selection() {
        assert!(matches!(
            emit_svg_plot(&report_with(&[]), &selection()),
            Err(ExperimentError::EmptySelection)
        ));
        let other = PlotSelection {
            method: "zhang".into(),
            ..selection()
        };
        assert!(matches!(
            emit_svg_plot(&report_with(&[(0, 1.0, 1.0)]), &other),
            Err(ExperimentError::EmptySelection)
        ));
    }

    #[test]
    fn one_group_per_n_and_stable_bytes() {
        let pts: Vec<_> = (0..6).map(|n| (n, 960.0 + n as f64, 540.0 - n as f64)).collect();
        let report = report_with(&pts);
        let a = emit_svg_plot(&report, &selection()).unwrap();
        assert_eq!(a, emit_svg_plot(&report, &selection()).unwrap());
        for (n, color) in GROUP_COLORS.iter().enumerate() {
            assert!(a.contains(&format!(r#"<g id="n{n}" fill="{color}""#)));
        }
        assert!(a.contains("window u=[959.500000, 965.500000]"));
    }
}
