use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    Invalid(String),

    #[error("rate law of reaction {reaction} out of domain: {message}")]
    Domain { reaction: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("undefined: irreversible reaction {0}")]
    Irreversible(String),

    #[error("entropy production divergent: {0}")]
    Divergent(String),

    #[error("step size underflow at t = {t} (problem looks stiff)")]
    StepUnderflow { t: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("state space too large: {states} states exceeds cap {cap}")]
    TooLarge { states: u64, cap: u64 },

    #[error("{0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::Divergent(_)
                | Error::StepUnderflow { .. }
                | Error::NoConvergence(_)
                | Error::Numerical(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
