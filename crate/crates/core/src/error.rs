use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. [`Error::code`] gives a stable
/// machine-readable name used in CLI output.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Error {
    #[error("series did not reach its target within {cap} terms")]
    NonConvergent { cap: usize },
    #[error("precision exhausted at {bits} bits")]
    PrecisionExhausted { bits: u32 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("zero probability mass at index {index}")]
    Support { index: usize },
    #[error("perturbation magnitude not certified to decay within {horizon} indices")]
    NoDecayCertificate { horizon: usize },
    #[error("index error: {0}")]
    Index(String),
    #[error("exact arithmetic required: {0}")]
    Mode(String),
    #[error("epsilon {0} lies outside [-1, 1]")]
    Range(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("division by a quantity that is not certified nonzero")]
    DivisionByZero,
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonConvergent { .. } => "NonConvergent",
            Error::PrecisionExhausted { .. } => "PrecisionExhausted",
            Error::Domain(_) => "DomainError",
            Error::Support { .. } => "SupportError",
            Error::NoDecayCertificate { .. } => "NoDecayCertificate",
            Error::Index(_) => "IndexError",
            Error::Mode(_) => "ModeError",
            Error::Range(_) => "RangeError",
            Error::Hypothesis(_) => "HypothesisError",
            Error::DivisionByZero => "DivisionByZero",
            Error::Parse(_) => "ParseError",
        }
    }
}
