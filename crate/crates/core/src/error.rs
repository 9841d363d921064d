use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function} takes {expected} argument(s), got {found}")]
    Arity {
        function: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no value bound for symbol `{0}`")]
    MissingBinding(String),
    #[error("symbol `{symbol}` is not an input of kernel `{kernel}`")]
    SignatureMismatch { kernel: String, symbol: String },
    #[error("duplicate input name `{0}`")]
    DuplicateInput(String),
    #[error("input `{name}`: expected {expected} value(s), got {actual}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        actual: usize,
    },
    #[error("expected {expected} input(s), got {actual}")]
    InputCount { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} is not a Lie group type")]
    NotLieGroup(String),
    #[error("residual must be a vector, got {0}")]
    NonVectorResidual(String),
    #[error("argument index {index} out of range for {count} input(s)")]
    ArgumentIndex { index: usize, count: usize },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: expected {expected}, found {found}")]
    TypeMismatch {
        key: String,
        expected: String,
        found: String,
    },
    #[error("unknown function `{name}`; valid names: {valid}")]
    UnknownFunction { name: String, valid: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
