use crate::C64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("lambda = {lambda} lies outside the resolvent half-plane Re > {omega}")]
    ResolventDomain { lambda: C64, omega: f64 },

    #[error("no contraction window: delta({step}) * |L| = {ratio} >= 1 at the smallest step")]
    ContractionFailure { step: f64, ratio: f64 },

    #[error("lambda = {lambda} is numerically in the spectrum (condition number {condition:.3e})")]
    SpectrumProximity { lambda: C64, condition: f64 },

    #[error("no sign change of the characteristic function on [{lo}, {hi}]: g(lo) = {g_lo}, g(hi) = {g_hi}")]
    NoRootInWindow { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("growth fit undefined: {0}")]
    FitDomain(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("renewal step failed at t = {t}: {reason}; try a smaller age step")]
    StepFailure { t: f64, reason: String },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
