//! Seeded experiment harness for principal-line calibration studies:
//! translation sweeps, skip-n principal point drift, half-turn pair
//! evaluation and baseline calibration, written as CSV reports with
//! optional SVG scatter plots.

pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod runners;
pub mod svg;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Method};
pub use error::{ExperimentError, Result};
pub use ingest::{export_corner_file, ingest_corner_file};
pub use report::{ExperimentReport, Row, RowKind};
pub use runners::{run_calibration, run_pair_evaluation, run_skip_experiment, run_translation_sweep, Scene};
pub use svg::{emit_svg_plot, PlotSelection};

/// Outcome of [`ingest_demo`].
#[derive(Debug, Clone)]
pub struct IngestDemo {
    pub corner_file: PathBuf,
    pub report: ExperimentReport,
    /// Whether the report from the ingested file matches the in-memory one
    /// byte for byte.
    pub identical: bool,
}

/// Exports the configured ring as a corner file under `dir`, reads it back
/// and calibrates from both copies.
pub fn ingest_demo(config: &ExperimentConfig, dir: &Path) -> Result<IngestDemo> {
    let scene = Scene::new(config)?;
    let ring = scene.render_ring(0, config.seed)?;
    let corner_file = dir.join("corners.csv");
    export_corner_file(&ring, &corner_file)?;
    let ingested = ingest_corner_file(&corner_file)?;
    let direct = run_calibration(config, Some(&ring))?;
    let report = run_calibration(config, Some(&ingested))?;
    let identical = direct.to_csv_bytes()? == report.to_csv_bytes()?;
    Ok(IngestDemo {
        corner_file,
        report,
        identical,
    })
}
