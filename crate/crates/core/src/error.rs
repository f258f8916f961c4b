use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x:.6}, {y:.6}) lies outside the closed unit disk")]
    Domain { x: f64, y: f64 },
    #[error("geodesic did not reach the boundary within {steps} steps")]
    Trapping { steps: usize },
    #[error("metric rejected: {0}")]
    NotSimple(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("{what}: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    Residual {
        what: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("operator of size {rows}x{cols} exceeds the budget of {budget} entries")]
    Budget { rows: usize, cols: usize, budget: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::GridMismatch(msg.into())
    }
}
