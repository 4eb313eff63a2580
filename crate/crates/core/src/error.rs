use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("axis `{0}` appears more than once")]
    DuplicateAxis(String),
    #[error("axis sets overlap on `{0}`")]
    OverlappingAxes(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid distortion measure: {0}")]
    InvalidDistortion(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("decoder error: {0}")]
    Decoder(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("wrong scheme family: expected {expected}, found {found}")]
    WrongFamily { expected: String, found: String },
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("too many descriptions: L = {got}, limit is {limit}")]
    TooManyDescriptions { got: usize, limit: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
