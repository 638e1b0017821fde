use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} sums to {sum}, expected 1 (tolerance 1e-9)")]
    NonStochastic { what: String, sum: f64 },

    #[error("negative probability {value} in {what}")]
    NegativeProbability { what: String, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid distortion matrix: {0}")]
    InvalidDistortion(String),

    #[error("invalid f-transform: {0}")]
    InvalidTransform(String),

    #[error("value {value} outside the range [{lo}, {hi}] of the f-transform")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration of {size} items exceeds the limit of {limit}")]
    TooLarge { size: f64, limit: f64 },

    #[error("routes disagree: via d_tilde {via_tilde} nats, via d_hat {via_hat} nats")]
    RouteMismatch { via_tilde: f64, via_hat: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
