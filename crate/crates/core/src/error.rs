use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("invalid structure: {0}")]
    Structure(String),
    #[error("weight system is not total: no value for {0}")]
    Totality(String),
    #[error("unsupported graph: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("non-generic input: {0}")]
    Genericity(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors raised by geometry or sampling rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Genericity(_) | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
