use thiserror::Error;

/// Errors raised by the spectral, source-model, interference and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("grid does not resolve {what}: step {step:.4e} exceeds limit {limit:.4e}")]
    Unresolved {
        what: &'static str,
        step: f64,
        limit: f64,
    },

    #[error("grid truncates {what}: half-span {half_span:.4e} below required {required:.4e}")]
    Truncated {
        what: &'static str,
        half_span: f64,
        required: f64,
    },

    #[error("density is not normalized: trace = {trace:.12}")]
    NotNormalized { trace: f64 },

    #[error("density is not Hermitian: relative asymmetry {asymmetry:.3e}")]
    NotHermitian { asymmetry: f64 },

    #[error("unphysical purity {0:.6} exceeds 1")]
    UnphysicalPurity(f64),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("no far-delay plateau: {0}")]
    NoPlateau(String),

    #[error("inconsistent widths: {0}")]
    InconsistentWidths(String),

    #[error("reference-limited dip: delta^2 = {delta_sq:.4e} s^2 does not exceed 1/(2 sigma_beta^2) = {limit:.4e} s^2")]
    ReferenceLimited { delta_sq: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}
