use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("refusing to enumerate {count} subsets (cap is {cap})")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("exact search exceeded its budget of {limit} nodes")]
    BudgetExceeded { limit: u64 },

    #[error("generator callback failed: {0}")]
    Callback(String),

    #[error("step {step}: {source}")]
    AtStep { step: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than by running out of
    /// resources or a failing external component.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Validation(_)
            | Error::Config(_)
            | Error::Domain(_)
            | Error::EnumerationCap { .. } => true,
            Error::BudgetExceeded { .. } | Error::Callback(_) => false,
            Error::AtStep { source, .. } => source.is_validation(),
        }
    }
}
