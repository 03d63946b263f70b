use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix has no nonzero singular value")]
    ZeroMatrix,

    #[error("measurement graph has no edges")]
    EmptyGraph,

    #[error("measurement graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("ground-truth rotations are required")]
    MissingTruth,

    #[error("eigensolver did not converge: residual {residual:.3e} after {iterations} iterations")]
    EigenNotConverged { residual: f64, iterations: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("Cholesky factorization failed: pivot {pivot:.3e} at column {column}")]
    Cholesky { column: usize, pivot: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
