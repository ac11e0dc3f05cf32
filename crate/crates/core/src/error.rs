use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: pivot {pivot:.3e} below {limit:.3e}")]
    SingularMatrix { pivot: f64, limit: f64 },
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix is not positive definite (pivot {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("process is not stationary (spectral radius {0:.6})")]
    NotStationary(f64),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("random model generation gave up after {0} rejections")]
    GenerationTimeout(usize),
    #[error("threshold {0} must be non-zero")]
    ZeroThreshold(usize),
    #[error("moment system is singular or ill-conditioned (cond {0:.3e})")]
    SingularSystem(f64),
    #[error("sensor graph has no edge ({0}, {1})")]
    MissingEdge(usize, usize),
    #[error("sensor graph is not connected")]
    DisconnectedGraph,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
