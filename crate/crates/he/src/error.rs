use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HeError {
    #[error("insecure parameters: {0}")]
    InsecureParams(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("vector dimension {k} does not fit ring degree {degree}")]
    DimensionTooLarge { k: usize, degree: usize },
    #[error("coefficient {value} is not below the plaintext modulus {modulus}")]
    CoefficientOutOfRange { value: u64, modulus: u64 },
    #[error("noise budget exhausted ({bits:.1} bits left)")]
    NoiseBudgetExhausted { bits: f64 },
    #[error("sanity slot decrypted to {got}, expected {expected}")]
    SanityCheckFailed { expected: u16, got: u16 },
    #[error("ciphertext was produced under different parameters")]
    ParamsMismatch,
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("malformed ciphertext encoding: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, HeError>;
