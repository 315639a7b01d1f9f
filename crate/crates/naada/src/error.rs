//! Exit-code classification of command failures.

use std::process::ExitCode;

/// A mistake in how the program was invoked or configured.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Usage,
    Data,
    Numeric,
}

impl Failure {
    pub fn code(self) -> u8 {
        match self {
            Failure::Usage => 1,
            Failure::Data => 2,
            Failure::Numeric => 3,
        }
    }

    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

/// Maps an error chain onto an exit category. Anything that is neither a
/// usage nor a numeric failure counts as a data error (IO, decoding, shapes).
pub fn classify(err: &anyhow::Error) -> Failure {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return Failure::Usage;
        }
        if let Some(e) = cause.downcast_ref::<naada_core::Error>() {
            return match e {
                naada_core::Error::Config(_) => Failure::Usage,
                naada_core::Error::Divergence { .. } => Failure::Numeric,
                naada_core::Error::Tensor(naada_core::TensorError::NonFinite { .. }) => Failure::Numeric,
                _ => Failure::Data,
            };
        }
        if let Some(naada_core::TensorError::NonFinite { .. }) = cause.downcast_ref() {
            return Failure::Numeric;
        }
    }
    Failure::Data
}
