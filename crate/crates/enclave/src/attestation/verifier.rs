//! Remote verifier: challenge issuance, quote verification with a single-use
//! nonce cache, and policy provisioning to attested enclaves.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use cpabe_core::codec::{Reader, Writer};
use ed25519_dalek::{SigningKey, VerifyingKey};
use rand::RngCore;
use thiserror::Error;

use super::provisioning::ProvisioningResponse;
use super::quote::Quote;
use crate::measurement::EnclaveMeasurement;

pub const DEFAULT_CHALLENGE_TTL: Duration = Duration::from_secs(60);
pub const DEFAULT_NONCE_CACHE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationChallenge {
    pub nonce: [u8; 16],
    /// Milliseconds since the unix epoch.
    pub issued_at: u64,
}

impl AttestationChallenge {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.field(&self.nonce).field(&self.issued_at.to_be_bytes());
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, VerifierError> {
        let bad = |what: &str| VerifierError::Malformed(format!("challenge {what}"));
        let mut r = Reader::new(b);
        let nonce = r.field().map_err(|_| bad("nonce"))?.try_into().map_err(|_| bad("nonce length"))?;
        let ts: [u8; 8] = r.field().map_err(|_| bad("timestamp"))?.try_into().map_err(|_| bad("timestamp length"))?;
        r.finish().map_err(|_| bad("trailing bytes"))?;
        Ok(Self { nonce, issued_at: u64::from_be_bytes(ts) })
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum Rejection {
    #[error("quote signature does not verify")]
    BadSignature,
    #[error("measurement does not match the expected enclave")]
    WrongMeasurement,
    #[error("quote is bound to a different challenge")]
    NonceMismatch,
    #[error("challenge expired or unknown")]
    StaleNonce,
    #[error("challenge already used")]
    ReplayedNonce,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifierError {
    #[error("quote rejected: {0}")]
    Rejected(#[from] Rejection),
    #[error("no accepted quote for this enclave session")]
    NotAttested,
    #[error("nonce cache full")]
    CacheFull,
    #[error("malformed message: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone)]
pub struct VerifierConfig {
    pub expected_measurement: EnclaveMeasurement,
    pub quoting_key: VerifyingKey,
    /// Policy handed to attested enclaves.
    pub policy_text: String,
    pub challenge_ttl: Duration,
    pub nonce_cache: usize,
}

impl VerifierConfig {
    pub fn new(expected_measurement: EnclaveMeasurement, quoting_key: VerifyingKey, policy_text: &str) -> Self {
        Self {
            expected_measurement,
            quoting_key,
            policy_text: policy_text.to_string(),
            challenge_ttl: DEFAULT_CHALLENGE_TTL,
            nonce_cache: DEFAULT_NONCE_CACHE,
        }
    }
}

type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

#[derive(Debug)]
struct Issued {
    issued_at: u64,
    used: bool,
}

#[derive(Default)]
struct State {
    issued: HashMap<[u8; 16], Issued>,
    /// Accepted quotes awaiting provisioning, keyed by nonce.
    accepted: HashMap<[u8; 16], Quote>,
}

pub struct Verifier {
    config: VerifierConfig,
    identity: SigningKey,
    clock: Clock,
    state: Mutex<State>,
}

impl fmt::Debug for Verifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Verifier").field("expected", &self.config.expected_measurement).finish_non_exhaustive()
    }
}

impl Verifier {
    pub fn new(config: VerifierConfig, identity: SigningKey) -> Self {
        Self::with_clock(config, identity, Arc::new(system_clock))
    }

    /// `clock` returns milliseconds since the unix epoch.
    pub fn with_clock(config: VerifierConfig, identity: SigningKey, clock: Clock) -> Self {
        Self { config, identity, clock, state: Mutex::new(State::default()) }
    }

    pub fn config(&self) -> &VerifierConfig {
        &self.config
    }

    /// Public half of the key that signs provisioning responses.
    pub fn identity_key(&self) -> VerifyingKey {
        self.identity.verifying_key()
    }

    fn ttl_ms(&self) -> u64 {
        self.config.challenge_ttl.as_millis() as u64
    }

    pub fn issue_challenge(&self) -> Result<AttestationChallenge, VerifierError> {
        let now = (self.clock)();
        let ttl = self.ttl_ms();
        let mut st = self.state.lock().expect("verifier lock");
        // only expired entries are evicted, so a forgotten nonce is never fresh
        st.issued.retain(|_, e| now.saturating_sub(e.issued_at) <= ttl);
        let live: std::collections::HashSet<[u8; 16]> = st.issued.keys().copied().collect();
        st.accepted.retain(|n, _| live.contains(n));
        if st.issued.len() >= self.config.nonce_cache {
            return Err(VerifierError::CacheFull);
        }
        let mut nonce = [0u8; 16];
        loop {
            rand::thread_rng().fill_bytes(&mut nonce);
            if !st.issued.contains_key(&nonce) {
                break;
            }
        }
        st.issued.insert(nonce, Issued { issued_at: now, used: false });
        Ok(AttestationChallenge { nonce, issued_at: now })
    }

    /// Accepts iff the signature verifies, the measurement matches, the quote
    /// embeds this challenge's nonce, and the challenge is fresh and unused.
    /// Acceptance consumes the challenge.
    pub fn verify_quote(
        &self,
        quote: &Quote,
        expected: &EnclaveMeasurement,
        challenge: &AttestationChallenge,
    ) -> Result<(), Rejection> {
        if !quote.signature_valid(&self.config.quoting_key) {
            return Err(Rejection::BadSignature);
        }
        if quote.measurement != *expected {
            return Err(Rejection::WrongMeasurement);
        }
        if quote.nonce() != challenge.nonce {
            return Err(Rejection::NonceMismatch);
        }
        let now = (self.clock)();
        let ttl = self.ttl_ms();
        let mut st = self.state.lock().expect("verifier lock");
        let entry = st.issued.get_mut(&challenge.nonce).ok_or(Rejection::StaleNonce)?;
        if entry.used {
            return Err(Rejection::ReplayedNonce);
        }
        if now.saturating_sub(entry.issued_at) > ttl {
            return Err(Rejection::StaleNonce);
        }
        entry.used = true;
        st.accepted.insert(challenge.nonce, quote.clone());
        Ok(())
    }

    /// Encrypts `policy_text` to the enclave key inside an accepted quote.
    /// Each acceptance allows one provisioning.
    pub fn provision_policy(&self, quote: &Quote, policy_text: &str) -> Result<ProvisioningResponse, VerifierError> {
        let accepted = self.state.lock().expect("verifier lock").accepted.remove(&quote.nonce());
        match accepted {
            Some(q) if q == *quote => ProvisioningResponse::seal(&self.identity, quote, policy_text.as_bytes())
                .map_err(|e| VerifierError::Malformed(e.to_string())),
            _ => Err(VerifierError::NotAttested),
        }
    }

    /// Verify against the configured measurement, then provision the
    /// configured policy.
    pub fn handle_quote(
        &self,
        challenge: &AttestationChallenge,
        quote: &Quote,
    ) -> Result<ProvisioningResponse, VerifierError> {
        self.verify_quote(quote, &self.config.expected_measurement, challenge)?;
        self.provision_policy(quote, &self.config.policy_text)
    }
}

/// Body of a quote submission: the challenge it answers and the quote.
pub fn encode_submission(challenge: &AttestationChallenge, quote: &Quote) -> Vec<u8> {
    let mut w = Writer::new();
    w.field(&challenge.to_bytes()).field(&quote.to_bytes());
    w.finish()
}

pub fn decode_submission(b: &[u8]) -> Result<(AttestationChallenge, Quote), VerifierError> {
    let mut r = Reader::new(b);
    let bad = |e: &dyn fmt::Display| VerifierError::Malformed(e.to_string());
    let challenge = AttestationChallenge::from_bytes(r.field().map_err(|e| bad(&e))?)?;
    let quote = Quote::from_bytes(r.field().map_err(|e| bad(&e))?).map_err(|e| bad(&e))?;
    r.finish().map_err(|e| bad(&e))?;
    Ok((challenge, quote))
}
