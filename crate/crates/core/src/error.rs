use thiserror::Error;

/// Error type shared by every estimator and test in this crate.
///
/// The three variants mirror the three failure classes the CLI maps to
/// distinct exit codes: bad call arguments, inputs outside a function's
/// mathematical domain, and numerical procedures that failed to converge.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition (wrong size,
    /// non-positive bandwidth, empty sample, mismatched partitions, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An input lies outside the mathematical domain of the operation
    /// (non-finite kernel argument, non-positive model density, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed (quadrature refinement did not converge,
    /// an objective was non-finite everywhere, all resamples degenerate).
    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
