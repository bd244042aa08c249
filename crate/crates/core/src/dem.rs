//! AES-256-GCM data encapsulation with a random 96-bit nonce.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::{CryptoRng, RngCore};

use crate::error::AbeError;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

pub fn dem_encrypt<R: RngCore + CryptoRng + ?Sized>(
    key: &[u8; 32],
    plaintext: &[u8],
    associated_data: &[u8],
    rng: &mut R,
) -> ([u8; NONCE_LEN], Vec<u8>) {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let body = seal_with_nonce(key, &nonce, plaintext, associated_data);
    (nonce, body)
}

/// Encrypts under a caller-chosen nonce. The caller owns nonce uniqueness.
pub fn seal_with_nonce(key: &[u8; 32], nonce: &[u8; NONCE_LEN], plaintext: &[u8], associated_data: &[u8]) -> Vec<u8> {
    Aes256Gcm::new(key.into())
        .encrypt(Nonce::from_slice(nonce), Payload { msg: plaintext, aad: associated_data })
        .expect("AES-GCM encryption only fails on absurd lengths")
}

pub fn dem_decrypt(
    key: &[u8; 32],
    nonce: &[u8; NONCE_LEN],
    body: &[u8],
    associated_data: &[u8],
) -> Result<Vec<u8>, AbeError> {
    Aes256Gcm::new(key.into())
        .decrypt(Nonce::from_slice(nonce), Payload { msg: body, aad: associated_data })
        .map_err(|_| AbeError::AuthenticationFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn round_trip_500_kb() {
        let mut rng = rand::thread_rng();
        let key: [u8; 32] = rng.gen();
        let mut pt = vec![0u8; 500 * 1024];
        rng.fill_bytes(&mut pt);
        let (nonce, body) = dem_encrypt(&key, &pt, b"hdr", &mut rng);
        assert_eq!(body.len(), pt.len() + TAG_LEN);
        assert_eq!(dem_decrypt(&key, &nonce, &body, b"hdr").unwrap(), pt);
    }

    #[test]
    fn empty_plaintext() {
        let mut rng = rand::thread_rng();
        let key: [u8; 32] = rng.gen();
        let (nonce, body) = dem_encrypt(&key, b"", b"", &mut rng);
        assert_eq!(dem_decrypt(&key, &nonce, &body, b"").unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn bit_flips_fail_authentication() {
        let mut rng = rand::thread_rng();
        let key: [u8; 32] = rng.gen();
        let mut pt = vec![0u8; 4096];
        rng.fill_bytes(&mut pt);
        let ad = b"associated".to_vec();
        let (nonce, body) = dem_encrypt(&key, &pt, &ad, &mut rng);
        for _ in 0..64 {
            let bit = rng.gen_range(0..body.len() * 8);
            let mut bad = body.clone();
            bad[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(dem_decrypt(&key, &nonce, &bad, &ad), Err(AbeError::AuthenticationFailure));
        }
        for bit in 0..NONCE_LEN * 8 {
            let mut n = nonce;
            n[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(dem_decrypt(&key, &n, &body, &ad), Err(AbeError::AuthenticationFailure));
        }
        for bit in 0..ad.len() * 8 {
            let mut a = ad.clone();
            a[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(dem_decrypt(&key, &nonce, &body, &a), Err(AbeError::AuthenticationFailure));
        }
    }

    #[test]
    fn wrong_key_fails() {
        let mut rng = rand::thread_rng();
        let (nonce, body) = dem_encrypt(&[1u8; 32], b"x", b"", &mut rng);
        assert!(dem_decrypt(&[2u8; 32], &nonce, &body, b"").is_err());
    }
}
