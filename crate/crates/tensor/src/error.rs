use std::fmt;

/// Errors raised by tensor construction and forward ops.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Operand shapes are incompatible for the named op.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// An op produced (or was given) a NaN or infinity.
    NonFinite { op: &'static str },
    /// `backward` was called on a tensor that is not a scalar.
    NotScalar { shape: Vec<usize> },
    /// A parameter was outside its documented domain.
    InvalidArgument { op: &'static str, msg: String },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: incompatible shapes {lhs:?} and {rhs:?}")
            }
            TensorError::NonFinite { op } => write!(f, "{op}: non-finite value encountered"),
            TensorError::NotScalar { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            TensorError::InvalidArgument { op, msg } => write!(f, "{op}: {msg}"),
        }
    }
}

impl std::error::Error for TensorError {}

pub type Result<T> = std::result::Result<T, TensorError>;
