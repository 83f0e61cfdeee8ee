use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Model configuration is inconsistent with itself or with the data.
    #[error("configuration error: {0}")]
    Config(String),
    /// Array or vector dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    /// Invalid input data (negative counts, duplicate labels, ...).
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The operation is not defined for the given input, e.g. summarising
    /// latent positions of an unaligned chain.
    #[error("refused: {0}")]
    Refused(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
