use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate region: probability mass of the truncation region underflows to zero")]
    DegenerateRegion,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no observed cases")]
    NoObservedCases,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("correction unavailable: {0}")]
    CorrectionUnavailable(String),
    #[error("hypothesis test unavailable: variance of the AUC difference is zero")]
    TestUnavailable,
    #[error("unknown {family} strategy `{name}` (available: {available})")]
    UnknownStrategy {
        family: &'static str,
        name: String,
        available: String,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}
