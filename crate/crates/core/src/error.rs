use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported map format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "stability bound violated: 4*lambda*max(g_b) = {lhs:.6e} exceeds 0.9*m = {rhs:.6e}"
    )]
    Unstable { lhs: f64, rhs: f64 },

    #[error("integration diverged at t = {t:.6} s, x = ({x:.3}, {y:.3})")]
    Divergence { t: f64, x: f64, y: f64 },

    #[error("need at least 2 samples for fixation detection, got {0}")]
    TooFewSamples(usize),

    #[error("empty scanpath")]
    EmptyScanpath,

    #[error("empty fixation set")]
    EmptyFixations,

    #[error("saliency map has zero variance; NSS is undefined")]
    ZeroVariance,

    #[error("every trajectory sample lies outside the retina")]
    NoInRetinaSamples,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("malformed record at {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
