use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("coordinate {0} has no fresh cached cross-product column")]
    MissingColumn(usize),
    #[error("non-finite or out-of-domain input: {0}")]
    NonFiniteInput(&'static str),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("group of size {0} is too small for the zero-sum transform")]
    GroupTooSmall(usize),
    #[error("symmetric eigensolve failed")]
    EigenFailure,
    #[error("no integrable envelope for tail order {0}")]
    EnvelopeDegenerate(f64),
    #[error("corrupt record at byte offset {offset}: {reason}")]
    CorruptRecord { offset: u64, reason: String },
    #[error("too few draws: got {got}, need at least {need}")]
    TooFewDraws { got: usize, need: usize },
    #[error("coordinate {0} is not on the unbounded watchlist")]
    NotWatched(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
