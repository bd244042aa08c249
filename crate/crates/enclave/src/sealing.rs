//! Measurement-bound sealed storage.
//!
//! ```text
//! "SEAL" | measurement[32] | nonce[12] | AES-256-GCM ciphertext
//! ```
//!
//! The sealing key is HKDF-SHA256 over the device root secret with the
//! measurement as context, and the AEAD associated data is the 48-byte
//! prefix. A blob opens only on the same device under the same measurement.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use cpabe_core::{AbeError, KeySealer};
use hkdf::Hkdf;
use rand::RngCore;
use sha2::Sha256;
use thiserror::Error;
use zeroize::{Zeroize, Zeroizing};

use crate::measurement::EnclaveMeasurement;

pub const SEAL_MAGIC: [u8; 4] = *b"SEAL";
const HEADER_LEN: usize = 4 + 32 + 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SealError {
    #[error("sealed blob is malformed: {0}")]
    Malformed(&'static str),
    #[error("sealed under a different measurement")]
    MeasurementMismatch,
    #[error("sealed blob failed authentication")]
    Authentication,
    #[error("sealed payload is invalid: {0}")]
    Payload(#[from] AbeError),
}

#[derive(Debug, Error)]
pub enum DeviceSecretError {
    #[error("device secret {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("device secret must be exactly 32 bytes, found {0}")]
    Length(usize),
}

/// Per-device root secret. Stands in for a key fused into the processor.
#[derive(Clone)]
pub struct DeviceSecret([u8; 32]);

impl DeviceSecret {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn generate() -> Self {
        let mut b = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut b);
        Self(b)
    }

    pub fn load(path: &Path) -> Result<Self, DeviceSecretError> {
        let io_err = |source| DeviceSecretError::Io { path: path.display().to_string(), source };
        let bytes = Zeroizing::new(fs::read(path).map_err(io_err)?);
        let arr: [u8; 32] = bytes.as_slice().try_into().map_err(|_| DeviceSecretError::Length(bytes.len()))?;
        Ok(Self(arr))
    }

    /// Loads the secret at `path`, creating it (mode 0600 on unix) if absent.
    pub fn load_or_create(path: &Path) -> Result<Self, DeviceSecretError> {
        if path.exists() {
            return Self::load(path);
        }
        let io_err = |source| DeviceSecretError::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let secret = Self::generate();
        write_private(path, &secret.0).map_err(io_err)?;
        Ok(secret)
    }

    pub(crate) fn derive(&self, salt: &[u8], info: &[&[u8]]) -> Zeroizing<[u8; 32]> {
        let hk = Hkdf::<Sha256>::new(Some(salt), &self.0);
        let mut out = Zeroizing::new([0u8; 32]);
        hk.expand_multi_info(info, out.as_mut()).expect("32 bytes is a valid HKDF output length");
        out
    }
}

impl fmt::Debug for DeviceSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DeviceSecret(..)")
    }
}

impl Drop for DeviceSecret {
    fn drop(&mut self) {
        self.0.zeroize();
    }
}

#[cfg(unix)]
fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    use std::io::Write;
    use std::os::unix::fs::OpenOptionsExt;
    let mut f = fs::OpenOptions::new().write(true).create_new(true).mode(0o600).open(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}

#[cfg(not(unix))]
fn write_private(path: &Path, bytes: &[u8]) -> io::Result<()> {
    fs::write(path, bytes)
}

/// Parsed view of a sealed blob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedBlob {
    pub measurement: EnclaveMeasurement,
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
}

impl SealedBlob {
    pub fn parse(bytes: &[u8]) -> Result<Self, SealError> {
        if bytes.len() < HEADER_LEN + 16 {
            return Err(SealError::Malformed("too short"));
        }
        if bytes[..4] != SEAL_MAGIC {
            return Err(SealError::Malformed("bad magic"));
        }
        let measurement = EnclaveMeasurement(bytes[4..36].try_into().expect("32 bytes"));
        let nonce = bytes[36..48].try_into().expect("12 bytes");
        Ok(Self { measurement, nonce, ciphertext: bytes[HEADER_LEN..].to_vec() })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.ciphertext.len());
        out.extend_from_slice(&SEAL_MAGIC);
        out.extend_from_slice(&self.measurement.0);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.ciphertext);
        out
    }
}

/// Sealing key for one (device, measurement) pair.
pub struct SealingKey {
    measurement: EnclaveMeasurement,
    key: Zeroizing<[u8; 32]>,
}

impl SealingKey {
    pub fn derive(device: &DeviceSecret, measurement: &EnclaveMeasurement) -> Self {
        Self { measurement: *measurement, key: device.derive(b"cpabe/seal/v1", &[&measurement.0]) }
    }

    pub fn measurement(&self) -> &EnclaveMeasurement {
        &self.measurement
    }

    pub fn seal(&self, data: &[u8]) -> Vec<u8> {
        let mut nonce = [0u8; 12];
        rand::thread_rng().fill_bytes(&mut nonce);
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(&SEAL_MAGIC);
        header.extend_from_slice(&self.measurement.0);
        header.extend_from_slice(&nonce);
        let ciphertext = Aes256Gcm::new(self.key.as_ref().into())
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: data, aad: &header })
            .expect("AES-GCM encryption only fails on absurd lengths");
        header.extend_from_slice(&ciphertext);
        header
    }

    pub fn unseal(&self, blob: &[u8]) -> Result<Zeroizing<Vec<u8>>, SealError> {
        let parsed = SealedBlob::parse(blob)?;
        if parsed.measurement != self.measurement {
            return Err(SealError::MeasurementMismatch);
        }
        Aes256Gcm::new(self.key.as_ref().into())
            .decrypt(Nonce::from_slice(&parsed.nonce), Payload { msg: &parsed.ciphertext, aad: &blob[..HEADER_LEN] })
            .map(Zeroizing::new)
            .map_err(|_| SealError::Authentication)
    }
}

impl KeySealer for SealingKey {
    type Error = SealError;

    fn seal(&self, plaintext: &[u8]) -> Vec<u8> {
        SealingKey::seal(self, plaintext)
    }

    fn unseal(&self, blob: &[u8]) -> Result<Zeroizing<Vec<u8>>, SealError> {
        SealingKey::unseal(self, blob)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn key(version: u32) -> (DeviceSecret, SealingKey) {
        let dev = DeviceSecret::from_bytes([9u8; 32]);
        let k = SealingKey::derive(&dev, &EnclaveMeasurement::compute("t", version));
        (dev, k)
    }

    #[test]
    fn round_trip_random_payloads() {
        let (_, k) = key(1);
        let mut rng = rand::thread_rng();
        for _ in 0..100 {
            let mut data = vec![0u8; 1024];
            rng.fill(&mut data[..]);
            assert_eq!(k.unseal(&k.seal(&data)).unwrap().as_slice(), data.as_slice());
        }
    }

    #[test]
    fn fresh_nonce_per_seal() {
        let (_, k) = key(1);
        let a = k.seal(b"same");
        let b = k.seal(b"same");
        assert_ne!(a, b);
        assert_eq!(k.unseal(&a).unwrap().as_slice(), b"same");
        assert_eq!(k.unseal(&b).unwrap().as_slice(), b"same");
    }

    #[test]
    fn bound_to_measurement_and_device() {
        let (dev, k1) = key(1);
        let blob = k1.seal(b"secret");
        let k2 = SealingKey::derive(&dev, &EnclaveMeasurement::compute("t", 2));
        assert_eq!(k2.unseal(&blob), Err(SealError::MeasurementMismatch));
        let other_device = SealingKey::derive(&DeviceSecret::from_bytes([1u8; 32]), k1.measurement());
        assert_eq!(other_device.unseal(&blob), Err(SealError::Authentication));
        // same device + measurement in another instance opens it
        let again = SealingKey::derive(&dev, &EnclaveMeasurement::compute("t", 1));
        assert_eq!(again.unseal(&blob).unwrap().as_slice(), b"secret");
    }

    #[test]
    fn every_sampled_bit_flip_rejected() {
        let (_, k) = key(1);
        let blob = k.seal(&[0x5a; 200]);
        let mut rng = rand::thread_rng();
        for _ in 0..256 {
            let bit = rng.gen_range(0..blob.len() * 8);
            let mut bad = blob.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            assert!(k.unseal(&bad).is_err(), "flip at bit {bit} accepted");
        }
    }

    #[test]
    fn truncation_rejected() {
        let (_, k) = key(1);
        let blob = k.seal(b"abc");
        for cut in 0..blob.len() {
            assert!(k.unseal(&blob[..cut]).is_err());
        }
    }

    #[test]
    fn device_secret_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/device.key");
        let a = DeviceSecret::load_or_create(&path).unwrap();
        let b = DeviceSecret::load_or_create(&path).unwrap();
        assert_eq!(a.0, b.0);
        std::fs::write(dir.path().join("short"), [1u8; 5]).unwrap();
        assert!(matches!(DeviceSecret::load(&dir.path().join("short")), Err(DeviceSecretError::Length(5))));
    }
}
