//! Policy delivery channel from the verifier to an attested enclave.
//!
//! The verifier runs X25519 against the enclave's ephemeral key from the
//! quote's report data, derives an AES-256-GCM key with HKDF (salt = challenge
//! nonce; context = measurement, report data, verifier ephemeral key) and
//! signs the whole response with its identity key.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use cpabe_core::codec::{Reader, Writer};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier as _, VerifyingKey};
use hkdf::Hkdf;
use rand::RngCore;
use sha2::Sha256;
use thiserror::Error;
use x25519_dalek::{PublicKey, StaticSecret};
use zeroize::Zeroizing;

use super::quote::{Quote, REPORT_DATA_LEN};
use crate::measurement::EnclaveMeasurement;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("malformed provisioning response")]
    Malformed,
    #[error("provisioning response signature does not verify")]
    BadSignature,
    #[error("key agreement produced a degenerate secret")]
    WeakKey,
    #[error("provisioning response does not decrypt under this enclave's key")]
    Decryption,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvisioningResponse {
    pub verifier_public: [u8; 32],
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
    pub signature: [u8; 64],
}

fn channel_key(
    shared: &[u8; 32],
    measurement: &EnclaveMeasurement,
    report_data: &[u8; REPORT_DATA_LEN],
    verifier_public: &[u8; 32],
) -> Zeroizing<[u8; 32]> {
    let hk = Hkdf::<Sha256>::new(Some(&report_data[32..48]), shared);
    let mut out = Zeroizing::new([0u8; 32]);
    hk.expand_multi_info(&[b"cpabe/provision/v1", &measurement.0, report_data, verifier_public], out.as_mut())
        .expect("32 bytes is a valid HKDF output length");
    out
}

fn associated_data(measurement: &EnclaveMeasurement, report_data: &[u8; 64], verifier_public: &[u8; 32]) -> Vec<u8> {
    [&measurement.0[..], report_data, verifier_public].concat()
}

impl ProvisioningResponse {
    fn signed_message(&self, measurement: &EnclaveMeasurement, report_data: &[u8; 64]) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(b"cpabe/provision-sig/v1")
            .raw(&measurement.0)
            .raw(report_data)
            .raw(&self.verifier_public)
            .raw(&self.nonce)
            .field(&self.ciphertext);
        w.finish()
    }

    /// Verifier side.
    pub fn seal(identity: &SigningKey, quote: &Quote, payload: &[u8]) -> Result<Self, ChannelError> {
        let secret = StaticSecret::random_from_rng(rand::rngs::OsRng);
        let verifier_public = PublicKey::from(&secret).to_bytes();
        let shared = secret.diffie_hellman(&PublicKey::from(quote.enclave_public_key()));
        if !shared.was_contributory() {
            return Err(ChannelError::WeakKey);
        }
        let key = channel_key(shared.as_bytes(), &quote.measurement, &quote.report_data, &verifier_public);
        let mut nonce = [0u8; 12];
        rand::thread_rng().fill_bytes(&mut nonce);
        let ad = associated_data(&quote.measurement, &quote.report_data, &verifier_public);
        let ciphertext = Aes256Gcm::new(key.as_ref().into())
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: payload, aad: &ad })
            .map_err(|_| ChannelError::Malformed)?;
        let mut out = Self { verifier_public, nonce, ciphertext, signature: [0; 64] };
        out.signature = identity.sign(&out.signed_message(&quote.measurement, &quote.report_data)).to_bytes();
        Ok(out)
    }

    /// Enclave side: checks the verifier signature, then decrypts with the
    /// ephemeral secret whose public half went into `report_data`.
    pub fn open(
        &self,
        verifier_key: &VerifyingKey,
        measurement: &EnclaveMeasurement,
        report_data: &[u8; 64],
        enclave_secret: &StaticSecret,
    ) -> Result<Zeroizing<Vec<u8>>, ChannelError> {
        let sig = Signature::from_bytes(&self.signature);
        verifier_key
            .verify(&self.signed_message(measurement, report_data), &sig)
            .map_err(|_| ChannelError::BadSignature)?;
        let shared = enclave_secret.diffie_hellman(&PublicKey::from(self.verifier_public));
        if !shared.was_contributory() {
            return Err(ChannelError::WeakKey);
        }
        let key = channel_key(shared.as_bytes(), measurement, report_data, &self.verifier_public);
        let ad = associated_data(measurement, report_data, &self.verifier_public);
        Aes256Gcm::new(key.as_ref().into())
            .decrypt(Nonce::from_slice(&self.nonce), Payload { msg: &self.ciphertext, aad: &ad })
            .map(Zeroizing::new)
            .map_err(|_| ChannelError::Decryption)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.field(&self.verifier_public).field(&self.nonce).field(&self.ciphertext).field(&self.signature);
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, ChannelError> {
        let mut r = Reader::new(b);
        let m = |_| ChannelError::Malformed;
        let verifier_public = r.field().map_err(m)?.try_into().map_err(|_| ChannelError::Malformed)?;
        let nonce = r.field().map_err(m)?.try_into().map_err(|_| ChannelError::Malformed)?;
        let ciphertext = r.field().map_err(m)?.to_vec();
        let signature = r.field().map_err(m)?.try_into().map_err(|_| ChannelError::Malformed)?;
        r.finish().map_err(m)?;
        Ok(Self { verifier_public, nonce, ciphertext, signature })
    }
}
