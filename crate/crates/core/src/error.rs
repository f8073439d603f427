use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input outside the punctured polydisk, or an empty truncated fiber.
    #[error("domain error: {0}")]
    Domain(String),

    /// Frame quantities need the dominant log-modulus in slot 0.
    #[error("chart error: a_{dominant}^2 = {dominant_sq} exceeds a_0^2 = {a0_sq}; reindex to the dominant chart first")]
    Chart {
        dominant: usize,
        dominant_sq: f64,
        a0_sq: f64,
    },

    /// Two independent evaluations of the same identity disagree. This is an
    /// implementation bug, never a data error.
    #[error("identity violation in {identity}: relative discrepancy {discrepancy:e} exceeds {tolerance:e}")]
    IdentityViolation {
        identity: &'static str,
        discrepancy: f64,
        tolerance: f64,
    },

    #[error("matrix is not positive Hermitian: {0}")]
    NotPositiveHermitian(&'static str),

    #[error("sampler acceptance rate {rate:e} is below {minimum:e}")]
    Sampler { rate: f64, minimum: f64 },

    /// A proven pointwise bound failed at a sampled point.
    #[error("invariant violation: {quantity} = {value} outside [{lower}, {upper}] at b = {b:?}")]
    InvariantViolation {
        quantity: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
        b: Vec<f64>,
    },

    #[error("power-law fit residual {residual:e} exceeds {threshold:e}")]
    Fit { residual: f64, threshold: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of a proven identity or bound, as opposed to bad input.
    pub fn is_check_failure(&self) -> bool {
        matches!(
            self,
            Error::IdentityViolation { .. } | Error::InvariantViolation { .. } | Error::Fit { .. }
        )
    }
}
