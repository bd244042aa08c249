//! The trusted side: key material and the policy live here and only leave
//! sealed. Everything enters and exits through [`Enclave::ecall`].

use std::fmt;
use std::sync::{Arc, Mutex};

use cpabe_core::abe::{self, MasterKey, PublicParams};
use cpabe_core::policy::{parse_attribute_list, parse_policy, AttributeSet, PolicyTree};
use cpabe_core::{AbeError, CiphertextContainer};
use ed25519_dalek::VerifyingKey;
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey, StaticSecret};

use crate::attestation::{report_mac, ProvisioningResponse, Report, REPORT_DATA_LEN};
use crate::frame::{encode_response, EcallRequest, EnclaveError, SealedKeys, StateErrorKind};
use crate::measurement::EnclaveMeasurement;
use crate::ocall::OcallHandler;
use crate::sealing::{DeviceSecret, SealError, SealingKey};

const SECURITY_LEVEL: u32 = 128;

pub struct EnclaveConfig {
    pub code_identity: String,
    pub config_version: u32,
    pub device_secret: DeviceSecret,
    /// Key that signs provisioning responses. Without it provisioning is
    /// refused.
    pub verifier_key: Option<VerifyingKey>,
}

impl EnclaveConfig {
    pub fn new(code_identity: &str, config_version: u32, device_secret: DeviceSecret) -> Self {
        Self { code_identity: code_identity.to_string(), config_version, device_secret, verifier_key: None }
    }

    pub fn with_verifier(mut self, key: VerifyingKey) -> Self {
        self.verifier_key = Some(key);
        self
    }

    pub fn measurement(&self) -> EnclaveMeasurement {
        EnclaveMeasurement::compute(&self.code_identity, self.config_version)
    }
}

struct Keys {
    pp: PublicParams,
    mk: MasterKey,
}

struct PendingAttestation {
    secret: StaticSecret,
    report_data: [u8; REPORT_DATA_LEN],
}

#[derive(Default)]
struct State {
    keys: Option<Keys>,
    policy: Option<PolicyTree>,
    pending: Option<PendingAttestation>,
}

pub struct Enclave {
    measurement: EnclaveMeasurement,
    device: DeviceSecret,
    sealing: SealingKey,
    verifier_key: Option<VerifyingKey>,
    ocall: Arc<dyn OcallHandler>,
    state: Mutex<State>,
}

impl fmt::Debug for Enclave {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Enclave").field("measurement", &self.measurement).finish_non_exhaustive()
    }
}

pub fn create_enclave(config: EnclaveConfig, ocall: Arc<dyn OcallHandler>) -> Enclave {
    let measurement = config.measurement();
    let sealing = SealingKey::derive(&config.device_secret, &measurement);
    Enclave {
        measurement,
        device: config.device_secret,
        sealing,
        verifier_key: config.verifier_key,
        ocall,
        state: Mutex::new(State::default()),
    }
}

fn abe_error(e: AbeError) -> EnclaveError {
    match e {
        AbeError::SatisfactionFailure => EnclaveError::AccessDenied,
        AbeError::AuthenticationFailure => EnclaveError::AuthenticationFailure,
        AbeError::MalformedCiphertext(m) | AbeError::MalformedContainer(m) | AbeError::Decode(m) => {
            EnclaveError::MalformedContainer(m)
        }
        AbeError::Policy(p) => EnclaveError::BadPolicy(p.to_string()),
        other => EnclaveError::Internal(other.to_string()),
    }
}

fn seal_error(e: SealError) -> EnclaveError {
    EnclaveError::Seal(e.to_string())
}

/// Leaf attributes, sorted and comma-joined. Enough for a host to offer
/// choices without learning the tree structure.
fn vocabulary_field(tree: &PolicyTree) -> Vec<u8> {
    tree.vocabulary().iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",").into_bytes()
}

fn parse_attrs(text: &str) -> Result<AttributeSet, EnclaveError> {
    parse_attribute_list(text).map_err(|e| EnclaveError::MalformedFrame(format!("attributes: {e}")))
}

impl Enclave {
    pub fn measurement(&self) -> &EnclaveMeasurement {
        &self.measurement
    }

    /// Runs one ECALL. Calls are serialized.
    pub fn ecall(&self, frame: &[u8]) -> Vec<u8> {
        let result = EcallRequest::decode(frame).and_then(|req| {
            log::debug!("ecall {:?}", req.opcode());
            self.dispatch(req)
        });
        if let Err(e) = &result {
            log::debug!("ecall failed: {e}");
        }
        encode_response(&result)
    }

    fn dispatch(&self, req: EcallRequest) -> Result<Vec<Vec<u8>>, EnclaveError> {
        let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
        match req {
            EcallRequest::Setup => self.setup(&mut st),
            EcallRequest::Restore { keys, policy } => self.restore(&mut st, &keys, policy.as_deref()),
            EcallRequest::Quote { challenge_nonce } => Ok(vec![self.report(&mut st, challenge_nonce).to_bytes()]),
            EcallRequest::ProvisionPolicy { response } => self.provision(&mut st, &response),
            EcallRequest::Encrypt { input, output, sealed } => {
                let transient;
                let (keys, policy) = match &sealed {
                    Some((keys, policy)) => {
                        transient = (self.unseal_keys(keys)?, self.unseal_policy(policy)?);
                        (&transient.0, &transient.1)
                    }
                    None => (
                        st.keys.as_ref().ok_or(EnclaveError::State(StateErrorKind::NoKeys))?,
                        st.policy.as_ref().ok_or(EnclaveError::State(StateErrorKind::NoPolicy))?,
                    ),
                };
                self.encrypt(keys, policy, &input, &output)
            }
            EcallRequest::Decrypt { attributes, input, output, sealed } => {
                let transient;
                let keys = match &sealed {
                    Some(keys) => {
                        transient = self.unseal_keys(keys)?;
                        &transient
                    }
                    None => st.keys.as_ref().ok_or(EnclaveError::State(StateErrorKind::NoKeys))?,
                };
                self.decrypt(keys, &attributes, &input, &output)
            }
            EcallRequest::Keygen { attributes } => {
                let keys = st.keys.as_ref().ok_or(EnclaveError::State(StateErrorKind::NoKeys))?;
                let attrs = parse_attrs(&attributes)?;
                let uk = abe::keygen(&keys.pp, &keys.mk, &attrs, &mut rand::thread_rng()).map_err(abe_error)?;
                Ok(vec![uk.to_bytes()])
            }
        }
    }

    fn setup(&self, st: &mut State) -> Result<Vec<Vec<u8>>, EnclaveError> {
        if st.keys.is_some() {
            return Err(EnclaveError::AlreadySetUp);
        }
        let (pp, mk) = abe::setup(SECURITY_LEVEL, &mut rand::thread_rng()).map_err(abe_error)?;
        let sealed_pub = self.sealing.seal(&pp.to_bytes());
        let sealed_master = mk.seal(&self.sealing);
        let public = pp.to_bytes();
        st.keys = Some(Keys { pp, mk });
        Ok(vec![sealed_pub, sealed_master, public])
    }

    fn unseal_keys(&self, keys: &SealedKeys) -> Result<Keys, EnclaveError> {
        let pp_bytes = self.sealing.unseal(&keys.public).map_err(seal_error)?;
        let pp = PublicParams::from_bytes(&pp_bytes).map_err(|e| EnclaveError::Seal(e.to_string()))?;
        let mk = MasterKey::unseal(&keys.master, &self.sealing).map_err(seal_error)?;
        if !mk.matches(&pp) {
            return Err(EnclaveError::Seal("master key does not belong to these public parameters".into()));
        }
        Ok(Keys { pp, mk })
    }

    fn unseal_policy(&self, blob: &[u8]) -> Result<PolicyTree, EnclaveError> {
        let text = self.sealing.unseal(blob).map_err(seal_error)?;
        let text = std::str::from_utf8(&text).map_err(|_| EnclaveError::Seal("sealed policy is not utf-8".into()))?;
        parse_policy(text).map_err(|e| EnclaveError::BadPolicy(e.to_string()))
    }

    fn restore(&self, st: &mut State, keys: &SealedKeys, policy: Option<&[u8]>) -> Result<Vec<Vec<u8>>, EnclaveError> {
        let keys = self.unseal_keys(keys)?;
        let policy = policy.map(|p| self.unseal_policy(p)).transpose()?;
        let out = policy.as_ref().map(|p| vec![vocabulary_field(p)]).unwrap_or_default();
        st.keys = Some(keys);
        st.policy = policy;
        Ok(out)
    }

    fn report(&self, st: &mut State, nonce: [u8; 16]) -> Report {
        let secret = StaticSecret::random_from_rng(rand::rngs::OsRng);
        let mut report_data = [0u8; REPORT_DATA_LEN];
        report_data[..32].copy_from_slice(PublicKey::from(&secret).as_bytes());
        report_data[32..48].copy_from_slice(&nonce);
        let mac = report_mac(&self.device, &self.measurement, &report_data);
        st.pending = Some(PendingAttestation { secret, report_data });
        Report { measurement: self.measurement, report_data, mac }
    }

    fn provision(&self, st: &mut State, response: &[u8]) -> Result<Vec<Vec<u8>>, EnclaveError> {
        if st.keys.is_none() {
            return Err(EnclaveError::State(StateErrorKind::NoKeys));
        }
        let verifier_key = self
            .verifier_key
            .as_ref()
            .ok_or_else(|| EnclaveError::ProvisioningFailed("no verifier key configured".into()))?;
        // one provisioning attempt per report, successful or not
        let pending = st.pending.take().ok_or(EnclaveError::State(StateErrorKind::NotAttested))?;
        let response =
            ProvisioningResponse::from_bytes(response).map_err(|e| EnclaveError::ProvisioningFailed(e.to_string()))?;
        let payload = response
            .open(verifier_key, &self.measurement, &pending.report_data, &pending.secret)
            .map_err(|e| EnclaveError::ProvisioningFailed(e.to_string()))?;
        let text = std::str::from_utf8(&payload).map_err(|_| EnclaveError::BadPolicy("policy is not utf-8".into()))?;
        let tree = parse_policy(text).map_err(|e| EnclaveError::BadPolicy(e.to_string()))?;
        let sealed = self.sealing.seal(tree.text().as_bytes());
        let vocabulary = vocabulary_field(&tree);
        st.policy = Some(tree);
        Ok(vec![sealed, vocabulary])
    }

    fn encrypt(
        &self,
        keys: &Keys,
        policy: &PolicyTree,
        input: &str,
        output: &str,
    ) -> Result<Vec<Vec<u8>>, EnclaveError> {
        let plaintext = self.ocall.read_input(input).map_err(|e| EnclaveError::OcallFailure(e.to_string()))?;
        let container = abe::encrypt_file(&keys.pp, policy, &plaintext, &mut rand::thread_rng()).map_err(abe_error)?;
        let bytes = container.to_bytes();
        self.ocall.write_output(output, &bytes).map_err(|e| EnclaveError::OcallFailure(e.to_string()))?;
        Ok(vec![output.as_bytes().to_vec(), Sha256::digest(&bytes).to_vec()])
    }

    fn decrypt(&self, keys: &Keys, attributes: &str, input: &str, output: &str) -> Result<Vec<Vec<u8>>, EnclaveError> {
        let requested = parse_attrs(attributes)?;
        let bytes = self.ocall.read_input(input).map_err(|e| EnclaveError::OcallFailure(e.to_string()))?;
        let container = CiphertextContainer::parse(&bytes).map_err(abe_error)?;
        let policy = container.policy().map_err(abe_error)?;
        // the key only ever covers attributes the policy can use
        let attrs: AttributeSet = requested.intersection(&policy.vocabulary()).cloned().collect();
        if attrs.is_empty() {
            return Err(EnclaveError::AccessDenied);
        }
        let uk = abe::keygen(&keys.pp, &keys.mk, &attrs, &mut rand::thread_rng()).map_err(abe_error)?;
        let plaintext = abe::decrypt_file(&keys.pp, &uk, &container).map_err(abe_error)?;
        self.ocall.write_output(output, &plaintext).map_err(|e| EnclaveError::OcallFailure(e.to_string()))?;
        Ok(vec![output.as_bytes().to_vec()])
    }
}
