use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point ({x}, {y}) lies outside the grid")]
    OutsideGrid { x: f64, y: f64 },

    #[error("anchor is not a sink of the drift (eigenvalue real parts {re:?})")]
    AnchorNotSink { re: Vec<f64> },

    #[error("equilibrium {label} no longer exists at beta = {beta}: eliminated at beta = {eliminated_at:.6}")]
    Eliminated {
        label: String,
        beta: f64,
        eliminated_at: f64,
    },

    #[error("unknown equilibrium label {0}")]
    UnknownLabel(String),

    #[error("no gate: every candidate saddle is unreachable")]
    NoGate,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("field container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
