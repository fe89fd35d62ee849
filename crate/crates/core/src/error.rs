use thiserror::Error;

use crate::integrate::SingularityReport;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("input is not traceless: |trace| = {trace:e} exceeds tolerance {tol:e}")]
    NotTraceless { trace: f64, tol: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("bracket [X_{p}, X_{q}] does not expand in the basis")]
    NotClosed { p: usize, q: usize },

    #[error("staged elimination left a nonzero component at X_{position} before stage {stage}")]
    BlockTriangularity { stage: usize, position: usize },

    #[error("stage {stage} does not have the expected shape: {detail}")]
    StageShape { stage: usize, detail: String },

    #[error("singular block in stage {stage}: condition estimate {cond:e}")]
    SingularBlock { stage: usize, cond: f64 },

    #[error("unknown output format `{0}`")]
    UnknownFormat(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("factorization chart broke down at t = {:.6} (stage {})", .0.time, .0.stage)]
    Breakdown(Box<SingularityReport>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
