use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A constructor or config precondition was violated; `field` names the
    /// offending parameter.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("non-finite amplitude encountered at step {step}")]
    NonFinite { step: u64 },

    #[error(
        "boundary contamination at t = {t}: density {density:.3e} within \
         {points} points of the grid edge exceeds {limit:.1e}"
    )]
    BoundaryContamination {
        t: f64,
        density: f64,
        points: usize,
        limit: f64,
    },

    #[error("no transmitted packet: region norm {norm:.3e} below floor {floor:.1e}")]
    NoTransmission { norm: f64, floor: f64 },

    #[error("transmitted packet has not emerged by t_max = {t_max}")]
    NotEmerged { t_max: f64 },

    #[error("fixed-point iteration did not converge at step {step} (residual {residual:.3e})")]
    NoConvergence { step: u64, residual: f64 },

    #[error("spectrum has zero mass")]
    EmptySpectrum,

    #[error("unknown quantity kind {0:?} (expected length, time or energy)")]
    UnknownKind(String),

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Short snake_case label, used as a status column in tables.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid { .. } => "invalid",
            Error::NonFinite { .. } => "non_finite",
            Error::BoundaryContamination { .. } => "boundary_contamination",
            Error::NoTransmission { .. } => "no_transmission",
            Error::NotEmerged { .. } => "not_emerged",
            Error::NoConvergence { .. } => "no_convergence",
            Error::EmptySpectrum => "empty_spectrum",
            Error::UnknownKind(_) => "unknown_kind",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
