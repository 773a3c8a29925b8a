use thiserror::Error;

/// Errors raised by the library. Extended values (`+inf`) are never errors;
/// they propagate through the functionals as ordinary `f64` infinities.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("triple is not compatible (residual {residual:.3e}); the linear solver is refused")]
    IncompatibleTriple { residual: f64 },

    #[error("explicit step dt = {dt:.6e} exceeds the stability limit {limit:.6e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("trajectory carries no flux snapshots")]
    MissingFlux,

    #[error("trajectory endpoints do not match (max gap {gap:.3e})")]
    EndpointMismatch { gap: f64 },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("grid spacing {h:.3e} is too coarse for ramp width {delta:.3e}")]
    GridTooCoarse { h: f64, delta: f64 },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. } | Error::NonFinite { .. } | Error::IncompatibleTriple { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
