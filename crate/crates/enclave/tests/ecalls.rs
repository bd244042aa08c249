mod common;

use std::sync::Arc;

use common::*;
use cpabe_enclave::frame::{decode_response, encode_response};
use cpabe_enclave::{
    create_enclave, CiphertextContainer, DeviceSecret, EcallRequest, EnclaveClient, EnclaveConfig, EnclaveError,
    MemoryStore, StateErrorKind,
};

#[test]
fn encrypt_needs_keys_then_policy() {
    let f = fixture();
    f.store.put("in", b"data".to_vec());
    assert_eq!(f.client.encrypt("in", "out", None).unwrap_err(), EnclaveError::State(StateErrorKind::NoKeys));
    f.client.setup().unwrap();
    assert_eq!(f.client.encrypt("in", "out", None).unwrap_err(), EnclaveError::State(StateErrorKind::NoPolicy));
    assert!(!f.store.contains("out"));
}

#[test]
fn second_setup_is_refused() {
    let f = fixture();
    f.client.setup().unwrap();
    assert_eq!(f.client.setup().unwrap_err(), EnclaveError::AlreadySetUp);
}

#[test]
fn encrypt_then_decrypt_by_attributes() {
    let f = fixture();
    ready(&f);
    f.store.put("plain", b"final grades".to_vec());
    let out = f.client.encrypt("plain", "ct", None).unwrap();
    let container = f.store.get("ct").unwrap();
    assert_eq!(sha2_digest(&container), out.digest);
    assert_eq!(CiphertextContainer::parse(&container).unwrap().policy_text, POLICY);

    f.client.decrypt("designation:professor, department:cs", "ct", "pt1", None).unwrap();
    assert_eq!(f.store.get("pt1").unwrap(), b"final grades");
    f.client.decrypt("designation:dean", "ct", "pt2", None).unwrap();
    assert_eq!(f.store.get("pt2").unwrap(), b"final grades");

    for attrs in ["designation:professor", "department:cs", "designation:student,department:ee", "unrelated"] {
        assert_eq!(f.client.decrypt(attrs, "ct", "nope", None).unwrap_err(), EnclaveError::AccessDenied, "{attrs}");
    }
    assert!(!f.store.contains("nope"));
}

fn sha2_digest(b: &[u8]) -> [u8; 32] {
    use sha2::Digest;
    sha2::Sha256::digest(b).into()
}

#[test]
fn tampered_container_fails_authentication_and_garbage_is_malformed() {
    let f = fixture();
    ready(&f);
    f.store.put("plain", vec![1u8; 4096]);
    f.client.encrypt("plain", "ct", None).unwrap();
    let mut ct = f.store.get("ct").unwrap();
    let last = ct.len() - 1;
    ct[last] ^= 1;
    f.store.put("bad", ct);
    assert_eq!(
        f.client.decrypt("designation:dean", "bad", "out", None).unwrap_err(),
        EnclaveError::AuthenticationFailure
    );
    f.store.put("junk", b"not a container".to_vec());
    assert!(matches!(
        f.client.decrypt("designation:dean", "junk", "out", None).unwrap_err(),
        EnclaveError::MalformedContainer(_)
    ));
    assert!(!f.store.contains("out"));
}

#[test]
fn missing_input_is_an_ocall_failure() {
    let f = fixture();
    ready(&f);
    assert!(matches!(f.client.encrypt("absent", "ct", None).unwrap_err(), EnclaveError::OcallFailure(_)));
}

#[test]
fn restart_restores_from_sealed_blobs() {
    let f = fixture();
    let (keys, policy) = ready(&f);
    f.store.put("plain", b"persisted".to_vec());
    f.client.encrypt("plain", "ct", None).unwrap();

    // new enclave instance on the same device and measurement
    let config = EnclaveConfig::new("test-enclave", 1, DeviceSecret::from_bytes(DEVICE));
    let again = EnclaveClient::new(Arc::new(create_enclave(config, f.store.clone())));
    assert_eq!(again.restore(&keys, Some(&policy)).unwrap().len(), 3);
    assert!(again.restore(&keys, None).unwrap().is_empty());
    again.restore(&keys, Some(&policy)).unwrap();
    again.decrypt("designation:dean", "ct", "pt", None).unwrap();
    assert_eq!(f.store.get("pt").unwrap(), b"persisted");
    again.encrypt("plain", "ct2", None).unwrap();

    // a different measurement cannot open them
    let other = EnclaveConfig::new("test-enclave", 2, DeviceSecret::from_bytes(DEVICE));
    let other = EnclaveClient::new(Arc::new(create_enclave(other, f.store.clone())));
    assert!(matches!(other.restore(&keys, Some(&policy)).unwrap_err(), EnclaveError::Seal(_)));
}

#[test]
fn stateless_calls_with_sealed_blobs() {
    let f = fixture();
    let (keys, policy) = ready(&f);
    let config = EnclaveConfig::new("test-enclave", 1, DeviceSecret::from_bytes(DEVICE));
    let fresh = EnclaveClient::new(Arc::new(create_enclave(config, f.store.clone())));
    f.store.put("plain", b"abc".to_vec());
    fresh.encrypt("plain", "ct", Some((&keys, &policy))).unwrap();
    fresh.decrypt("designation:dean", "ct", "pt", Some(&keys)).unwrap();
    assert_eq!(f.store.get("pt").unwrap(), b"abc");
    // state was not changed by the transient calls
    assert_eq!(fresh.encrypt("plain", "ct", None).unwrap_err(), EnclaveError::State(StateErrorKind::NoKeys));
}

#[test]
fn mismatched_public_and_master_blobs_rejected() {
    let a = fixture();
    let b = fixture();
    let ka = a.client.setup().unwrap();
    let kb = b.client.setup().unwrap();
    let mixed = cpabe_enclave::SealedKeys { public: ka.public, master: kb.master };
    assert!(matches!(a.client.restore(&mixed, None).unwrap_err(), EnclaveError::Seal(_)));
}

#[test]
fn keygen_returns_a_key_for_the_requested_attributes() {
    let f = fixture();
    f.client.setup().unwrap();
    let a = f.client.keygen("designation:dean").unwrap();
    let b = f.client.keygen("designation:dean").unwrap();
    assert!(!a.is_empty());
    assert_ne!(a, b, "keys are randomized");
    assert!(matches!(f.client.keygen("bad attr!").unwrap_err(), EnclaveError::MalformedFrame(_)));
}

#[test]
fn malformed_frames_get_error_responses() {
    let enclave = create_enclave(EnclaveConfig::new("x", 1, DeviceSecret::generate()), Arc::new(MemoryStore::new()));
    assert_eq!(decode_response(&enclave.ecall(&[])).unwrap_err(), EnclaveError::MalformedFrame("empty frame".into()));
    assert_eq!(decode_response(&enclave.ecall(&[0xee])).unwrap_err(), EnclaveError::UnknownOpcode(0xee));
    let mut truncated = EcallRequest::Keygen { attributes: "a".into() }.encode();
    truncated.pop();
    assert!(matches!(decode_response(&enclave.ecall(&truncated)).unwrap_err(), EnclaveError::MalformedFrame(_)));
    // responses round trip through the codec
    let e = EnclaveError::State(StateErrorKind::NotAttested);
    assert_eq!(decode_response(&encode_response(&Err(e.clone()))).unwrap_err(), e);
}

#[test]
fn concurrent_ecalls_are_serialized_safely() {
    let f = fixture();
    ready(&f);
    for i in 0..8 {
        f.store.put(&format!("in{i}"), vec![i as u8; 1000]);
    }
    std::thread::scope(|s| {
        for i in 0..8 {
            let client = f.client.clone();
            s.spawn(move || {
                client.encrypt(&format!("in{i}"), &format!("ct{i}"), None).unwrap();
                client.decrypt("designation:dean", &format!("ct{i}"), &format!("pt{i}"), None).unwrap();
            });
        }
    });
    for i in 0..8 {
        assert_eq!(f.store.get(&format!("pt{i}")).unwrap(), vec![i as u8; 1000]);
    }
}
