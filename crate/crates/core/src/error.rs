use thiserror::Error;

use crate::space::PointId;

/// Errors raised by the library.
///
/// The variants fall into three families that the CLI maps onto exit codes:
/// precondition/domain failures, resource limits, and invariant violations
/// (the latter signal either a bug or a space that is not regular enough).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error(
        "empty annulus around point {center}: B(x, {radius}) \\ B(x, {c}·{radius}) has no points \
         (mu(B(x,r)) = {outer_measure}, mu(B(x,cr)) = {inner_measure})"
    )]
    AnnulusEmpty {
        center: PointId,
        radius: f64,
        c: f64,
        outer_measure: f64,
        inner_measure: f64,
    },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::InvariantViolation(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Unsupported(_) => "unsupported",
            Error::Resource(_) => "resource",
            Error::Construction(_) => "construction",
            Error::AnnulusEmpty { .. } => "annulus_empty",
            Error::InvariantViolation(_) => "invariant_violation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for failures of checked chain/certificate invariants.
    pub fn is_invariant_failure(&self) -> bool {
        matches!(
            self,
            Error::AnnulusEmpty { .. } | Error::InvariantViolation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
