//! Remote attestation and policy provisioning.
//!
//! Flow: the verifier issues a challenge nonce; the enclave binds a fresh
//! X25519 key and the nonce into a report; the platform turns the report into
//! a signed quote; the verifier checks the quote and answers with the policy
//! encrypted to the enclave key.

mod provisioning;
mod quote;
mod verifier;

use thiserror::Error;

pub use provisioning::{ChannelError, ProvisioningResponse};
pub use quote::{load_or_create_signing_key, Platform, Quote, QuoteError, Report, REPORT_DATA_LEN};
pub use verifier::{
    decode_submission, encode_submission, AttestationChallenge, Rejection, Verifier, VerifierConfig, VerifierError,
    DEFAULT_CHALLENGE_TTL, DEFAULT_NONCE_CACHE,
};

pub(crate) use quote::report_mac;

use crate::frame::EnclaveError;
use crate::host::{EnclaveClient, ProvisionedPolicy};

#[derive(Debug, Error)]
pub enum AttestationError {
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error("verifier transport: {0}")]
    Transport(String),
    #[error(transparent)]
    Quote(#[from] QuoteError),
    #[error(transparent)]
    Enclave(#[from] EnclaveError),
}

/// How the host reaches a verifier.
pub trait VerifierChannel {
    fn challenge(&self) -> Result<AttestationChallenge, AttestationError>;
    fn submit(&self, challenge: &AttestationChallenge, quote: &Quote)
        -> Result<ProvisioningResponse, AttestationError>;
}

impl VerifierChannel for Verifier {
    fn challenge(&self) -> Result<AttestationChallenge, AttestationError> {
        Ok(self.issue_challenge()?)
    }

    fn submit(
        &self,
        challenge: &AttestationChallenge,
        quote: &Quote,
    ) -> Result<ProvisioningResponse, AttestationError> {
        Ok(self.handle_quote(challenge, quote)?)
    }
}

impl<T: VerifierChannel + ?Sized> VerifierChannel for std::sync::Arc<T> {
    fn challenge(&self) -> Result<AttestationChallenge, AttestationError> {
        (**self).challenge()
    }

    fn submit(
        &self,
        challenge: &AttestationChallenge,
        quote: &Quote,
    ) -> Result<ProvisioningResponse, AttestationError> {
        (**self).submit(challenge, quote)
    }
}

/// Has the enclave produce a report for `challenge` and gets it quoted.
pub fn generate_quote(
    client: &EnclaveClient,
    platform: &Platform,
    challenge: &AttestationChallenge,
) -> Result<Quote, AttestationError> {
    let report = client.report(challenge.nonce)?;
    Ok(platform.quote(&report)?)
}

/// Full round: challenge, quote, verification, provisioning.
pub fn attest_and_provision<C: VerifierChannel + ?Sized>(
    client: &EnclaveClient,
    platform: &Platform,
    channel: &C,
) -> Result<ProvisionedPolicy, AttestationError> {
    let challenge = channel.challenge()?;
    let quote = generate_quote(client, platform, &challenge)?;
    let response = channel.submit(&challenge, &quote)?;
    Ok(client.provision_policy(&response)?)
}
