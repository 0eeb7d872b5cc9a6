use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of some textual input could not be understood.
    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },

    /// A value violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Every paired difference was zero, so no rank statistic exists.
    #[error("degenerate sample: all paired differences are zero")]
    DegenerateSample,

    /// A version carries no fault-revealing tests.
    #[error("unlabeled version `{0}`: no fault-revealing tests")]
    UnlabeledVersion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
