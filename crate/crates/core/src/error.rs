use thiserror::Error;

/// Errors raised by the sensing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("search grid is empty")]
    EmptyGrid,

    #[error("known symbol at (tx {tx}, subcarrier {subcarrier}) has zero magnitude")]
    ZeroSymbol { tx: usize, subcarrier: usize },

    #[error("noise subspace is empty: dimension {dim} cannot hold {n_targets} targets plus noise")]
    Rank { dim: usize, n_targets: usize },

    #[error("only {found} resolvable peaks, {requested} requested")]
    InsufficientPeaks { found: usize, requested: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
