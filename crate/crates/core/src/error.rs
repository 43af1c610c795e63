use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("mesh quality: {0}")]
    MeshQuality(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// The surface violates `H > 0`.
    #[error("hypothesis violated: mean curvature {mean_curvature:e} at vertex {vertex} is not positive")]
    Hypothesis { vertex: usize, mean_curvature: f64 },
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    Numeric { iterations: usize, residual: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
