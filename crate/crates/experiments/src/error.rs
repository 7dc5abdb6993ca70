use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config syntax: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] pline_core::Error),
    #[error("line {line}{}: {message}", pose.as_deref().map(|p| format!(" (pose {p})")).unwrap_or_default())]
    Parse {
        line: usize,
        pose: Option<String>,
        message: String,
    },
    #[error("inconsistent board: {0}")]
    InconsistentBoard(String),
    #[error("no rows match the plot selection")]
    EmptySelection,
    #[error("summary check failed: {0}")]
    SummaryMismatch(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
