use alloc::string::String;

/// Errors raised by the simulator and its analyses.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("covariance is not positive semi-definite (after jitter) in {0}")]
    NotPsd(&'static str),
    #[error("covariance is singular in {0}")]
    Singular(&'static str),
    #[error("target belief was already revealed")]
    AlreadyRevealed,
    #[error("degenerate regression design: {0}")]
    DegenerateDesign(&'static str),
    #[error("not enough data: {0}")]
    NotEnoughData(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
