//! Error type shared across the crate.
//!
//! Guard errors carry the name of the numerical guard that tripped so the
//! CLI can report it and exit with the dedicated status code.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("chart dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("affine scale coordinate must be strictly positive, got {0}")]
    NonPositiveScale(f64),

    #[error("region `{0}` has zero measure at this grid resolution")]
    ZeroMeasure(String),

    #[error("quadrature grid is empty")]
    EmptyGrid,

    #[error("bounding box is unbounded or degenerate")]
    BadBBox,

    #[error("states live on different sample grids")]
    GridMismatch,

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semi-definite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("delta must lie in (0, 1), got {0}")]
    DeltaOutOfRange(f64),

    #[error("numerical guard `{guard}`: {detail}")]
    Guard { guard: &'static str, detail: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn guard(guard: &'static str, detail: impl Into<String>) -> Self {
        Error::Guard {
            guard,
            detail: detail.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical guard, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::DeltaOutOfRange(_) => 2,
            Error::Io(_) | Error::Json(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
