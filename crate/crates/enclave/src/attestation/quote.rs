//! Enclave reports and platform-signed quotes.
//!
//! An enclave emits a [`Report`] (measurement + 64 bytes of report data)
//! MAC'd under a key derived from the device secret. The [`Platform`]
//! quoting service checks that MAC and signs the same bytes with the
//! platform quoting key, whose verification half is shared with verifiers
//! ahead of time.

use std::fs;
use std::io;
use std::path::Path;

use cpabe_core::codec::{Reader, Writer};
use ed25519_dalek::{Signature, Signer, SigningKey, Verifier as _, VerifyingKey};
use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::measurement::EnclaveMeasurement;
use crate::sealing::DeviceSecret;

pub const REPORT_DATA_LEN: usize = 64;
const QUOTE_DOMAIN: &[u8] = b"cpabe/quote/v1";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuoteError {
    #[error("report MAC does not verify on this platform")]
    BadReportMac,
    #[error("malformed {0}")]
    Malformed(&'static str),
}

pub(crate) fn report_mac(device: &DeviceSecret, measurement: &EnclaveMeasurement, report_data: &[u8; 64]) -> [u8; 32] {
    let key = device.derive(b"cpabe/report/v1", &[]);
    let mut mac = Hmac::<Sha256>::new_from_slice(key.as_ref()).expect("any key length");
    mac.update(&measurement.0);
    mac.update(report_data);
    mac.finalize().into_bytes().into()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub measurement: EnclaveMeasurement,
    pub report_data: [u8; REPORT_DATA_LEN],
    pub mac: [u8; 32],
}

impl Report {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(128);
        w.raw(&self.measurement.0).raw(&self.report_data).raw(&self.mac);
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, QuoteError> {
        let mut r = Reader::new(b);
        let err = |_| QuoteError::Malformed("report");
        let out = Self {
            measurement: EnclaveMeasurement(r.array().map_err(err)?),
            report_data: r.array().map_err(err)?,
            mac: r.array().map_err(err)?,
        };
        r.finish().map_err(err)?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quote {
    pub measurement: EnclaveMeasurement,
    pub report_data: [u8; REPORT_DATA_LEN],
    pub signature: [u8; 64],
}

impl Quote {
    pub(crate) fn signed_message(measurement: &EnclaveMeasurement, report_data: &[u8; 64]) -> Vec<u8> {
        let mut m = Vec::with_capacity(QUOTE_DOMAIN.len() + 96);
        m.extend_from_slice(QUOTE_DOMAIN);
        m.extend_from_slice(&measurement.0);
        m.extend_from_slice(report_data);
        m
    }

    /// Checks the platform signature only.
    pub fn signature_valid(&self, quoting_key: &VerifyingKey) -> bool {
        let sig = Signature::from_bytes(&self.signature);
        quoting_key.verify(&Self::signed_message(&self.measurement, &self.report_data), &sig).is_ok()
    }

    /// Enclave ephemeral X25519 public key carried in the report data.
    pub fn enclave_public_key(&self) -> [u8; 32] {
        self.report_data[..32].try_into().expect("32 bytes")
    }

    /// Challenge nonce carried in the report data.
    pub fn nonce(&self) -> [u8; 16] {
        self.report_data[32..48].try_into().expect("16 bytes")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(180);
        w.field(&self.measurement.0).field(&self.report_data).field(&self.signature);
        w.finish()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, QuoteError> {
        let mut r = Reader::new(b);
        let err = |_| QuoteError::Malformed("quote");
        let measurement = r.field().map_err(err)?.try_into().map_err(|_| QuoteError::Malformed("quote measurement"))?;
        let report_data = r.field().map_err(err)?.try_into().map_err(|_| QuoteError::Malformed("quote report data"))?;
        let signature = r.field().map_err(err)?.try_into().map_err(|_| QuoteError::Malformed("quote signature"))?;
        r.finish().map_err(err)?;
        Ok(Self { measurement: EnclaveMeasurement(measurement), report_data, signature })
    }
}

/// Quoting service of one simulated platform.
pub struct Platform {
    device: DeviceSecret,
    quoting_key: SigningKey,
}

impl Platform {
    pub fn new(device: DeviceSecret, quoting_key: SigningKey) -> Self {
        Self { device, quoting_key }
    }

    pub fn verification_key(&self) -> VerifyingKey {
        self.quoting_key.verifying_key()
    }

    pub fn quote(&self, report: &Report) -> Result<Quote, QuoteError> {
        let expected = report_mac(&self.device, &report.measurement, &report.report_data);
        // constant-time compare via the hmac crate
        let mut mac = Hmac::<Sha256>::new_from_slice(&expected).expect("any key length");
        mac.update(b"cmp");
        let mut other = Hmac::<Sha256>::new_from_slice(&report.mac).expect("any key length");
        other.update(b"cmp");
        if mac.verify(&other.finalize().into_bytes()).is_err() {
            return Err(QuoteError::BadReportMac);
        }
        let sig = self.quoting_key.sign(&Quote::signed_message(&report.measurement, &report.report_data));
        Ok(Quote { measurement: report.measurement, report_data: report.report_data, signature: sig.to_bytes() })
    }
}

/// Loads a 32-byte Ed25519 seed from `path`, generating it on first use.
pub fn load_or_create_signing_key(path: &Path) -> io::Result<SigningKey> {
    if path.exists() {
        let bytes = fs::read(path)?;
        let seed: [u8; 32] = bytes
            .as_slice()
            .try_into()
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "signing key seed must be 32 bytes"))?;
        return Ok(SigningKey::from_bytes(&seed));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let key = SigningKey::generate(&mut rand::rngs::OsRng);
    fs::write(path, key.to_bytes())?;
    Ok(key)
}
