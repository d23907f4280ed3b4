use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis function {index} is numerically dependent on its predecessors (residual norm {residual:.3e}); reduce the number of modes")]
    DependentBasis { index: usize, residual: f64 },

    #[error("Lippmann-Schwinger system at k = {k} is singular or ill-conditioned (pivot ratio estimate {condition:.3e}, relative residual {residual:.3e})")]
    SingularSystem { k: f64, condition: f64, residual: f64 },

    #[error("|u / u_in| = {magnitude:.3e} at node {node}, wavenumber index {k_index}: the logarithmic change of variables is undefined")]
    NearZeroTotalField { node: usize, k_index: usize, magnitude: f64 },

    #[error("cylinder series did not converge within {terms} terms")]
    SeriesNotConverged { terms: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },

    #[error("{path}:{line}: missing column {column}")]
    MissingColumn { path: PathBuf, line: usize, column: &'static str },

    #[error("config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
