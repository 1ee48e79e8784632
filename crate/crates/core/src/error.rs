//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Grid or parameter dimensions are invalid or do not match.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A scalar parameter is outside its admissible range.
    #[error("value error: {0}")]
    Value(String),
    /// Parameters are individually valid but mutually inconsistent.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// A file does not follow the expected format.
    #[error("format error: {0}")]
    Format(String),
    /// A tensor file payload is shorter than its header announces.
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncation { expected: usize, found: usize },
    /// Bit buffer length is not a multiple of the bits per symbol.
    #[error("bit buffer length {0} is not a multiple of 2")]
    Length(usize),
    /// A latent vector does not fit into the delay-Doppler grid.
    #[error("latent of length {len} exceeds grid capacity {capacity}")]
    Capacity { len: usize, capacity: usize },
    /// A dense operation was requested on a frame that is too large.
    #[error("frame of {size} symbols exceeds the dense limit of {limit}")]
    Size { size: usize, limit: usize },
    /// The normal equations could not be factorized.
    #[error("normal equations are numerically singular")]
    Singular,
    /// A diffusion step index is out of range.
    #[error("step {t} outside 1..={t_steps}")]
    Range { t: usize, t_steps: usize },
    /// Vector lengths fed to a predictor or denoiser do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    /// Consecutive predictor layers do not chain.
    #[error("layer chain broken at layer {layer}: {detail}")]
    DimChain { layer: usize, detail: String },
    /// Invalid run configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
