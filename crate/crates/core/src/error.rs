use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: rating {value} is not on the scale grid")]
    OffGrid { line: usize, value: f64 },
    #[error("line {line}: duplicate rating for user {user:?}, item {item:?}")]
    Duplicate {
        line: usize,
        user: String,
        item: String,
    },
    #[error("invalid rating scale: {0}")]
    InvalidScale(String),
    #[error("rating domain mismatch: dataset has {dataset} quantized levels above zero, policy expects {policy}")]
    DomainMismatch { dataset: u16, policy: u16 },
    #[error("invalid perturbation policy: {0}")]
    InvalidPolicy(String),
    #[error("user index {0} out of range")]
    UnknownUser(u32),
    #[error("item index {0} out of range")]
    UnknownItem(u32),
    #[error("similarity and gain are defined for two distinct users")]
    SameUser,
    #[error("neighbors per item must be at least 1")]
    InvalidK,
    #[error("score weight {0} is outside [0, 1]")]
    InvalidWeight(f64),
    #[error("target user {0} has no other users to draw neighbors from")]
    NoNeighbors(u32),
    #[error("quantized rating {rating} exceeds the scale maximum {max}")]
    RatingOutOfRange { rating: u16, max: u16 },
    #[error("model generation mismatch: {0}")]
    GenerationMismatch(String),
    #[error("cannot form {clusters} clusters from {points} points")]
    TooManyClusters { clusters: usize, points: usize },
    #[error("nothing to cluster")]
    EmptyInput,
    #[error("invalid cluster sizes: min {min} > max {max}")]
    InvalidSizes { min: usize, max: usize },
    #[error("value {0} does not fit a 16-bit lane")]
    LaneOverflow(u64),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
