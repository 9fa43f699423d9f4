use thiserror::Error;

/// Errors produced anywhere in the compiler pipeline or the kernels.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("non-quasi-affine construct at {pos}: {msg}")]
    NonAffine { pos: usize, msg: String },

    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("unbound variable or parameter `{0}`")]
    Unbound(String),

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("unbounded box dimension {0}")]
    UnboundedBox(usize),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("non-affine: handled conservatively ({0})")]
    NonAffineComputation(String),

    #[error("out-of-bounds access {buffer}{index:?}")]
    OutOfBounds { buffer: String, index: Vec<i64> },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("csr invariant violated: {0}")]
    Csr(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
