//! Shared error type for the laboratory.
//!
//! Every fallible operation reports through [`LabError`]; numerical failure
//! modes (divergence, unresolved classification, degenerate comparisons) are
//! first-class variants so callers can react instead of parsing strings.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested accuracy cannot be certified at the configured
    /// resolution (grid too coarse, domain truncated too early, ...).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// A time integration or iteration left the regime where the scheme is
    /// meaningful (overflow, NaN, step size collapse).
    #[error("numerical divergence: {0}")]
    Divergence(String),

    /// Comparison of two curves that coincide to machine precision; an
    /// intersection count would be meaningless.
    #[error("degenerate comparison: {0}")]
    Degenerate(String),

    /// A phase-space trajectory could not be assigned to any of the known
    /// behaviour classes within the allotted span.
    #[error("classification failure: {0}")]
    Classification(String),

    /// Shooting run reached its span end without a decision; the caller may
    /// retry with a larger `eta_max`.
    #[error("shooting undecided at eta = {eta_max}: {detail}")]
    Undecided { eta_max: f64, detail: String },

    /// Malformed configuration file or field value.
    #[error("config error: {0}")]
    Config(String),

    /// Command line misuse (unknown preset, invalid flag combination, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("verification failure: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type LabResult<T> = Result<T, LabError>;

impl LabError {
    /// Process exit code the command line tool maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) | LabError::Config(_) => 2,
            LabError::Verification(_) => 1,
            LabError::Io(_) => 2,
            _ => 3,
        }
    }
}
