use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame mismatch: expected `{expected}`, found `{found}`")]
    FrameMismatch { expected: String, found: String },
    #[error("empty input")]
    EmptyInput,
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("too few poses: need at least {needed}, got {got}")]
    TooFewPoses { needed: usize, got: usize },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("no correspondences survived gating")]
    NoCorrespondences,
    #[error("degenerate pivot motion (condition number {condition:.3e})")]
    DegenerateMotion { condition: f64 },
    #[error("timestamp mismatch at sample {index}: {a} vs {b}")]
    TimestampMismatch { index: usize, a: f64, b: f64 },
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("insufficient overlap between curves ({overlap} of {required} samples required)")]
    InsufficientOverlap { overlap: usize, required: usize },
    #[error("synchronization did not converge after {iterations} iterations (best offset {offset} s)")]
    NoConvergence { offset: f64, iterations: usize },
    #[error("negative error value in stage `{0}`")]
    NegativeError(String),
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("scene has no triangles")]
    EmptyScene,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn frames(expected: &impl ToString, found: &impl ToString) -> Self {
        Error::FrameMismatch { expected: expected.to_string(), found: found.to_string() }
    }
}
