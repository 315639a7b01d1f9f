use alloc::string::String;
use alloc::vec::Vec;

/// Failures raised by tensor primitives and the autodiff engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}

impl TensorError {
    pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> Self {
        TensorError::InvalidArgument {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn mismatch(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        TensorError::ShapeMismatch {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }
}

/// Crate-level error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("image is in the {found} domain, expected {expected}")]
    Domain {
        expected: &'static str,
        found: &'static str,
    },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("image of {height}x{width} is smaller than {min}x{min}")]
    TooSmall { height: usize, width: usize, min: usize },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("dataset is empty: {0}")]
    EmptyDataset(&'static str),
    #[error("no gradient reached trainable parameter {index}")]
    MissingGradient { index: usize },
    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
