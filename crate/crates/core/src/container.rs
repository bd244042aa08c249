//! On-disk hybrid ciphertext.
//!
//! ```text
//! "CPSX" | version:u8 = 1 | u32 len | policy text | u32 len | KEM blob | nonce[12] | AEAD body
//! ```
//!
//! Lengths are big-endian. The AEAD associated data is every byte from the
//! magic through the nonce, so a body cannot be moved under another header.

use rand::{CryptoRng, RngCore};

use crate::codec::{Reader, Writer};
use crate::dem::{dem_decrypt, seal_with_nonce, NONCE_LEN, TAG_LEN};
use crate::error::AbeError;
use crate::group::BilinearGroup;
use crate::policy::{parse_policy, PolicyTree};
use crate::scheme::{kem_decrypt, kem_encrypt, KemCiphertext, PublicParams, UserKey};

pub const CONTAINER_MAGIC: [u8; 4] = *b"CPSX";
pub const CONTAINER_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiphertextContainer {
    pub policy_text: String,
    pub kem_blob: Vec<u8>,
    pub nonce: [u8; NONCE_LEN],
    pub body: Vec<u8>,
}

impl CiphertextContainer {
    /// Bytes from the magic through the nonce; also the AEAD associated data.
    pub fn header_bytes(&self) -> Vec<u8> {
        header(&self.policy_text, &self.kem_blob, &self.nonce)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header_bytes();
        out.extend_from_slice(&self.body);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, AbeError> {
        let bad = |what: String| AbeError::MalformedContainer(what);
        let mut r = Reader::new(bytes);
        let magic = r.array::<4>().map_err(|e| bad(e.to_string()))?;
        if magic != CONTAINER_MAGIC {
            return Err(bad(format!("bad magic {magic:02x?}")));
        }
        let version = r.u8().map_err(|e| bad(e.to_string()))?;
        if version != CONTAINER_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let policy_text = r.str().map_err(|e| bad(format!("policy field: {e}")))?.to_string();
        let kem_blob = r.field().map_err(|e| bad(format!("KEM field: {e}")))?.to_vec();
        let nonce = r.array::<NONCE_LEN>().map_err(|e| bad(format!("nonce: {e}")))?;
        let body = r.rest();
        if body.len() < TAG_LEN {
            return Err(bad(format!("body of {} bytes is shorter than the tag", body.len())));
        }
        Ok(Self { policy_text, kem_blob, nonce, body: body.to_vec() })
    }

    pub fn policy(&self) -> Result<PolicyTree, AbeError> {
        parse_policy(&self.policy_text).map_err(|e| AbeError::MalformedContainer(format!("policy: {e}")))
    }
}

fn header(policy_text: &str, kem_blob: &[u8], nonce: &[u8; NONCE_LEN]) -> Vec<u8> {
    let mut w = Writer::with_capacity(4 + 1 + 8 + policy_text.len() + kem_blob.len() + NONCE_LEN);
    w.raw(&CONTAINER_MAGIC).u8(CONTAINER_VERSION).str(policy_text).field(kem_blob).raw(nonce);
    w.finish()
}

pub fn encrypt_file<G, R>(
    pp: &PublicParams<G>,
    policy: &PolicyTree,
    plaintext: &[u8],
    rng: &mut R,
) -> Result<CiphertextContainer, AbeError>
where
    G: BilinearGroup,
    R: RngCore + CryptoRng + ?Sized,
{
    let (secret, kem) = kem_encrypt(pp, policy, rng)?;
    Ok(seal_body(policy, &kem, secret.as_bytes(), plaintext, rng))
}

/// DEM half of [`encrypt_file`], split out so callers can time the phases.
pub fn seal_body<G, R>(
    policy: &PolicyTree,
    kem: &KemCiphertext<G>,
    key: &[u8; 32],
    plaintext: &[u8],
    rng: &mut R,
) -> CiphertextContainer
where
    G: BilinearGroup,
    R: RngCore + CryptoRng + ?Sized,
{
    let policy_text = policy.text().to_string();
    let kem_blob = kem.components_to_bytes();
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let ad = header(&policy_text, &kem_blob, &nonce);
    let body = seal_with_nonce(key, &nonce, plaintext, &ad);
    CiphertextContainer { policy_text, kem_blob, nonce, body }
}

pub fn decrypt_file<G: BilinearGroup>(
    pp: &PublicParams<G>,
    uk: &UserKey<G>,
    container: &CiphertextContainer,
) -> Result<Vec<u8>, AbeError> {
    let kem = open_kem::<G>(container)?;
    let secret = kem_decrypt(pp, uk, &kem)?;
    open_body(container, secret.as_bytes())
}

pub fn open_kem<G: BilinearGroup>(container: &CiphertextContainer) -> Result<KemCiphertext<G>, AbeError> {
    let policy = container.policy()?;
    KemCiphertext::from_components(policy, &container.kem_blob).map_err(|e| match e {
        AbeError::MalformedCiphertext(m) => AbeError::MalformedContainer(format!("KEM blob: {m}")),
        other => other,
    })
}

pub fn open_body(container: &CiphertextContainer, key: &[u8; 32]) -> Result<Vec<u8>, AbeError> {
    dem_decrypt(key, &container.nonce, &container.body, &container.header_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Bls12381;
    use crate::policy::parse_attribute_list;
    use crate::scheme::{keygen, setup};
    use rand::Rng;

    type G = Bls12381;

    fn env() -> (PublicParams<G>, UserKey<G>, UserKey<G>) {
        let mut rng = rand::thread_rng();
        let (pp, mk) = setup::<G, _>(128, &mut rng).unwrap();
        let good = keygen(&pp, &mk, &parse_attribute_list("a,b").unwrap(), &mut rng).unwrap();
        let bad = keygen(&pp, &mk, &parse_attribute_list("a").unwrap(), &mut rng).unwrap();
        (pp, good, bad)
    }

    #[test]
    fn encrypt_decrypt_file() {
        let (pp, good, bad) = env();
        let mut rng = rand::thread_rng();
        let mut pt = vec![0u8; 10_000];
        rng.fill(&mut pt[..]);
        let policy = parse_policy("a b 2of2").unwrap();
        let c = encrypt_file(&pp, &policy, &pt, &mut rng).unwrap();
        let parsed = CiphertextContainer::parse(&c.to_bytes()).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(parsed.policy_text, "a b 2of2");
        assert_eq!(decrypt_file(&pp, &good, &parsed).unwrap(), pt);
        assert_eq!(decrypt_file(&pp, &bad, &parsed), Err(AbeError::SatisfactionFailure));
    }

    #[test]
    fn version_and_magic_checked() {
        let (pp, _, _) = env();
        let c = encrypt_file(&pp, &parse_policy("a").unwrap(), b"hi", &mut rand::thread_rng()).unwrap();
        let mut bytes = c.to_bytes();
        bytes[4] = 2;
        assert!(matches!(CiphertextContainer::parse(&bytes), Err(AbeError::MalformedContainer(_))));
        let mut bytes = c.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(CiphertextContainer::parse(&bytes), Err(AbeError::MalformedContainer(_))));
    }

    #[test]
    fn truncations_never_panic() {
        let (pp, good, _) = env();
        let mut rng = rand::thread_rng();
        let c = encrypt_file(&pp, &parse_policy("a b 1of2").unwrap(), b"payload", &mut rng).unwrap();
        let bytes = c.to_bytes();
        let kem_start = 4 + 1 + 4 + c.policy_text.len() + 4;
        for _ in 0..1000 {
            // cut somewhere inside the KEM blob or right after it
            let cut = rng.gen_range(0..kem_start + c.kem_blob.len() + NONCE_LEN);
            match CiphertextContainer::parse(&bytes[..cut]) {
                Err(AbeError::MalformedContainer(_)) => {}
                Ok(parsed) => {
                    assert!(matches!(
                        decrypt_file(&pp, &good, &parsed),
                        Err(AbeError::MalformedContainer(_) | AbeError::AuthenticationFailure)
                    ))
                }
                Err(e) => panic!("unexpected {e}"),
            }
        }
    }

    #[test]
    fn shortened_kem_field_is_malformed() {
        let (pp, good, _) = env();
        let mut c = encrypt_file(&pp, &parse_policy("a b 1of2").unwrap(), b"x", &mut rand::thread_rng()).unwrap();
        c.kem_blob.truncate(c.kem_blob.len() - 10);
        let reparsed = CiphertextContainer::parse(&c.to_bytes()).unwrap();
        assert!(matches!(decrypt_file(&pp, &good, &reparsed), Err(AbeError::MalformedContainer(_))));
    }

    #[test]
    fn body_moved_under_other_header_fails() {
        let (pp, good, _) = env();
        let mut rng = rand::thread_rng();
        let policy = parse_policy("a b 2of2").unwrap();
        let c1 = encrypt_file(&pp, &policy, b"first", &mut rng).unwrap();
        let mut c2 = encrypt_file(&pp, &policy, b"second", &mut rng).unwrap();
        // same key material would be needed anyway; also keep c2's nonce and kem
        c2.body = c1.body.clone();
        assert_eq!(decrypt_file(&pp, &good, &c2), Err(AbeError::AuthenticationFailure));

        // rewriting the policy text to an equivalent one breaks the AD too
        let mut c3 = c1.clone();
        c3.policy_text = "b a 2of2".into();
        assert!(decrypt_file(&pp, &good, &c3).is_err());
    }

    #[test]
    fn tampered_body_fails() {
        let (pp, good, _) = env();
        let c = encrypt_file(&pp, &parse_policy("a").unwrap(), &[7u8; 256], &mut rand::thread_rng()).unwrap();
        let mut bytes = c.to_bytes();
        let last = bytes.len() - 1;
        bytes[last - 20] ^= 0x01;
        let parsed = CiphertextContainer::parse(&bytes).unwrap();
        assert_eq!(decrypt_file(&pp, &good, &parsed), Err(AbeError::AuthenticationFailure));
    }
}
