use thiserror::Error;

/// Errors produced anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),

    #[error("quadrature degree {0} is outside the supported range 0..=20")]
    UnsupportedQuadrature(usize),

    #[error("polynomial degree k = {0} is not supported (expected 0, 1 or 2)")]
    UnsupportedDegree(usize),

    #[error("degenerate element {element}: local Gram matrix is not positive definite")]
    DegenerateElement { element: usize },

    #[error("degenerate edge {edge}: local Gram matrix is not positive definite")]
    DegenerateEdge { edge: usize },

    #[error("coefficient check failed at ({x:.6}, {y:.6}): {reason}")]
    Coefficient { x: f64, y: f64, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{method} did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{method} broke down at iteration {iteration}")]
    Breakdown {
        method: &'static str,
        iteration: usize,
    },

    #[error("dense solve failed: matrix is singular")]
    Singular,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 1 for numerical failures, 2 for bad input or
    /// configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged { .. }
            | Error::Breakdown { .. }
            | Error::Singular
            | Error::DegenerateElement { .. }
            | Error::DegenerateEdge { .. } => 1,
            _ => 2,
        }
    }
}
