use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("table has {actual} entries but the scope needs {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("table entry {index} is {value}; entries must be finite and non-negative")]
    BadEntry { index: usize, value: f64 },

    #[error("variable `{0}` appears more than once in a scope")]
    DuplicateVariable(String),

    #[error("variable `{name}` has frame size {left} in one operand and {right} in the other")]
    FrameMismatch {
        name: String,
        left: usize,
        right: usize,
    },

    #[error("variable `{0}` is not in the factor scope")]
    NotInScope(String),

    #[error("value {value} is out of range for `{name}` (frame size {card})")]
    ValueOutOfRange {
        name: String,
        value: usize,
        card: usize,
    },

    #[error("assignment does not give a value to `{0}`")]
    MissingAssignment(String),

    #[error("invalid base combination operator: {0}")]
    InvalidOperator(String),

    #[error("invalid network: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("invalid heterogeneous factorization: {0}")]
    InvalidFactorization(String),

    #[error("factorization is not tidy: {}", .0.join("; "))]
    Untidy(Vec<String>),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("invalid elimination ordering: {}", .0.join("; "))]
    InvalidOrdering(Vec<String>),

    #[error("evidence {0} has probability zero")]
    InconsistentEvidence(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("state space of {required} entries exceeds the oracle cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("{0}")]
    Document(String),
}
