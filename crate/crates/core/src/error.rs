use thiserror::Error;

use crate::group::DecodeError;
use crate::policy::PolicyError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbeError {
    #[error("unsupported security level {0} (only 128 is available)")]
    UnsupportedSecurityLevel(u32),
    #[error("attribute set is empty")]
    EmptyAttributeSet,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("attributes do not satisfy the policy")]
    SatisfactionFailure,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(String),
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("decode error: {0}")]
    Decode(String),
    #[error("key self-check failed: {0}")]
    SelfCheckFailed(String),
}

impl From<DecodeError> for AbeError {
    fn from(e: DecodeError) -> Self {
        AbeError::Decode(e.to_string())
    }
}
