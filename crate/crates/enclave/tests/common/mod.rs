#![allow(dead_code)]

use std::sync::Arc;

use cpabe_enclave::attestation::{attest_and_provision, Platform, Verifier, VerifierConfig};
use cpabe_enclave::{create_enclave, DeviceSecret, EnclaveClient, EnclaveConfig, MemoryStore, SealedKeys};
use ed25519_dalek::SigningKey;

pub const DEVICE: [u8; 32] = [0x42; 32];
pub const POLICY: &str = "designation:professor department:cs 2of2 designation:dean 1of2";

pub struct Fixture {
    pub store: Arc<MemoryStore>,
    pub client: EnclaveClient,
    pub platform: Platform,
    pub verifier: Arc<Verifier>,
    pub verifier_identity: SigningKey,
}

pub fn platform() -> Platform {
    Platform::new(DeviceSecret::from_bytes(DEVICE), SigningKey::from_bytes(&[7; 32]))
}

pub fn fixture_with_version(version: u32) -> Fixture {
    let store = Arc::new(MemoryStore::new());
    let verifier_identity = SigningKey::from_bytes(&[9; 32]);
    let config = EnclaveConfig::new("test-enclave", version, DeviceSecret::from_bytes(DEVICE))
        .with_verifier(verifier_identity.verifying_key());
    let measurement = config.measurement();
    let client = EnclaveClient::new(Arc::new(create_enclave(config, store.clone())));
    let platform = platform();
    let verifier = Arc::new(Verifier::new(
        VerifierConfig::new(measurement, platform.verification_key(), POLICY),
        verifier_identity.clone(),
    ));
    Fixture { store, client, platform, verifier, verifier_identity }
}

pub fn fixture() -> Fixture {
    fixture_with_version(1)
}

/// Set up keys and provision the policy; returns the sealed blobs.
pub fn ready(f: &Fixture) -> (SealedKeys, Vec<u8>) {
    let keys = f.client.setup().unwrap();
    let policy = attest_and_provision(&f.client, &f.platform, &f.verifier).unwrap();
    assert_eq!(policy.vocabulary, ["department:cs", "designation:dean", "designation:professor"]);
    (keys, policy.sealed)
}
