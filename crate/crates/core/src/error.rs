use thiserror::Error;

/// Errors raised by parsing, validation and the decision pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Validation(String),
    #[error("result bound {0} must be simplified away before building the containment problem")]
    UnsupportedBound(u32),
    #[error("constraint class mismatch: {0}")]
    Misclassified(String),
    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),
    #[error("rule `{0}` is not linear")]
    NonLinear(String),
    #[error("rule `{0}` is not guarded")]
    NotGuarded(String),
    #[error("strategy does not fit the constraints: {0}")]
    Strategy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
