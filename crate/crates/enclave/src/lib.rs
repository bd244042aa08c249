//! A simulated trusted execution environment hosting the CP-ABE master key.
//!
//! The [`Enclave`] owns the master key and the provisioned access policy and
//! exposes a byte-framed ECALL interface ([`frame`]). File data moves through
//! host-provided OCALLs ([`ocall`]). Key material leaves only sealed to the
//! enclave measurement ([`sealing`]). Policies arrive through remote
//! attestation ([`attestation`]).
//!
//! ```
//! use std::sync::Arc;
//! use cpabe_enclave::{create_enclave, DeviceSecret, EnclaveClient, EnclaveConfig, MemoryStore};
//!
//! let store = Arc::new(MemoryStore::new());
//! let config = EnclaveConfig::new("doc-enclave", 1, DeviceSecret::generate());
//! let client = EnclaveClient::new(Arc::new(create_enclave(config, store.clone())));
//! let sealed = client.setup().unwrap();
//! assert!(sealed.master.starts_with(b"SEAL"));
//! ```

pub mod attestation;
mod enclave;
pub mod frame;
mod host;
pub mod measurement;
pub mod ocall;
pub mod sealing;

pub use enclave::{create_enclave, Enclave, EnclaveConfig};
pub use frame::{EcallRequest, EnclaveError, Opcode, SealedKeys, StateErrorKind};
pub use host::{EnclaveClient, EncryptOutcome, ProvisionedPolicy};
pub use measurement::EnclaveMeasurement;
pub use ocall::{Direction, MemoryStore, OcallError, OcallHandler, RecordingOcalls, Transcript};
pub use sealing::{DeviceSecret, DeviceSecretError, SealError, SealingKey};

/// Types the host needs to talk about policies and containers without
/// touching the scheme itself.
pub use cpabe_core::policy::{
    parse_attribute_list, parse_policy, AttributeName, AttributeSet, PolicyError, PolicyTree,
};
pub use cpabe_core::CiphertextContainer;
