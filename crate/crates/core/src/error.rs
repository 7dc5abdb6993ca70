use thiserror::Error;

/// Errors raised by the geometry and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("optimization diverged: {0}")]
    Diverged(String),

    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid radial distortion: {0}")]
    InvalidDistortion(String),
    #[error("invalid board pose: {0}")]
    InvalidPose(String),
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("board plane is parallel to the image plane")]
    DegenerateFrontalPose,

    #[error("invalid checkerboard dimensions: {0}")]
    InvalidDimensions(String),
    #[error("invalid pose recipe: {0}")]
    InvalidRecipe(String),
    #[error("skipping {skip} of {count} poses leaves fewer than 3")]
    TooFewRemaining { count: usize, skip: usize },

    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("ill-conditioned principal line constraints")]
    IllConditioned,
    #[error("lines are too close to parallel to fix a point")]
    NearParallelLines,
    #[error("need at least {needed} lines, got {got}")]
    TooFewLines { needed: usize, got: usize },

    #[error("degenerate calibration set: {0}")]
    DegenerateSet(String),
}

pub type Result<T> = std::result::Result<T, Error>;
