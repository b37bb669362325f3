use thiserror::Error;

/// Errors surfaced by grid construction, sampling, transforms, and runs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("truncation error at t = {time}: tail mass fraction {tail:.3e} exceeds threshold {threshold:.3e}")]
    Truncation {
        time: f64,
        tail: f64,
        threshold: f64,
    },

    #[error("kernel resolution error: |t| = {t_abs} below minimum {t_min} for Mehler quadrature")]
    KernelResolution { t_abs: f64, t_min: f64 },

    #[error("dyadic level {level} outside resolvable range [{min}, {max}]")]
    DyadicRange { level: f64, min: f64, max: f64 },

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("annulus search failed: no annulus with L6 norm <= {threshold:.3e} inside the grid")]
    AnnulusSearch { threshold: f64 },

    #[error("window error: {0}")]
    Window(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
