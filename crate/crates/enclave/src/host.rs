//! Untrusted host side: typed wrapper that frames requests for an enclave.

use std::sync::Arc;

use crate::attestation::{ProvisioningResponse, Report};
use crate::enclave::Enclave;
use crate::frame::{decode_response, EcallRequest, EnclaveError, SealedKeys};
use crate::ocall::{Direction, Transcript};

#[derive(Debug, Clone)]
pub struct EncryptOutcome {
    pub output: String,
    /// SHA-256 of the container written to `output`.
    pub digest: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvisionedPolicy {
    pub sealed: Vec<u8>,
    /// Sorted leaf attributes of the installed policy.
    pub vocabulary: Vec<String>,
}

fn vocabulary(field: Vec<u8>) -> Result<Vec<String>, EnclaveError> {
    let text = string(field)?;
    Ok(text.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
}

#[derive(Debug, Clone)]
pub struct EnclaveClient {
    enclave: Arc<Enclave>,
    transcript: Option<Arc<Transcript>>,
}

fn expect_fields(fields: Vec<Vec<u8>>, n: usize) -> Result<Vec<Vec<u8>>, EnclaveError> {
    if fields.len() == n {
        Ok(fields)
    } else {
        Err(EnclaveError::Internal(format!("expected {n} response fields, got {}", fields.len())))
    }
}

fn string(b: Vec<u8>) -> Result<String, EnclaveError> {
    String::from_utf8(b).map_err(|_| EnclaveError::Internal("response field is not utf-8".into()))
}

impl EnclaveClient {
    pub fn new(enclave: Arc<Enclave>) -> Self {
        Self { enclave, transcript: None }
    }

    /// Records every request and response frame.
    pub fn with_transcript(mut self, transcript: Arc<Transcript>) -> Self {
        self.transcript = Some(transcript);
        self
    }

    pub fn enclave(&self) -> &Arc<Enclave> {
        &self.enclave
    }

    pub fn call_raw(&self, frame: &[u8]) -> Vec<u8> {
        if let Some(t) = &self.transcript {
            t.record(Direction::EcallRequest, frame);
        }
        let response = self.enclave.ecall(frame);
        if let Some(t) = &self.transcript {
            t.record(Direction::EcallResponse, &response);
        }
        response
    }

    pub fn call(&self, request: &EcallRequest) -> Result<Vec<Vec<u8>>, EnclaveError> {
        decode_response(&self.call_raw(&request.encode()))
    }

    pub fn setup(&self) -> Result<SealedKeys, EnclaveError> {
        self.setup_with_public().map(|(keys, _)| keys)
    }

    /// Sealed keys plus the serialized public parameters in the clear.
    pub fn setup_with_public(&self) -> Result<(SealedKeys, Vec<u8>), EnclaveError> {
        let mut f = expect_fields(self.call(&EcallRequest::Setup)?, 3)?;
        let clear = f.pop().expect("three fields");
        let master = f.pop().expect("three fields");
        let public = f.pop().expect("three fields");
        Ok((SealedKeys { public, master }, clear))
    }

    /// Returns the policy vocabulary when a sealed policy was supplied.
    pub fn restore(&self, keys: &SealedKeys, policy: Option<&[u8]>) -> Result<Vec<String>, EnclaveError> {
        let req = EcallRequest::Restore { keys: keys.clone(), policy: policy.map(<[u8]>::to_vec) };
        let mut f = expect_fields(self.call(&req)?, usize::from(policy.is_some()))?;
        f.pop().map(vocabulary).unwrap_or(Ok(Vec::new()))
    }

    pub fn report(&self, challenge_nonce: [u8; 16]) -> Result<Report, EnclaveError> {
        let mut f = expect_fields(self.call(&EcallRequest::Quote { challenge_nonce })?, 1)?;
        Report::from_bytes(&f.remove(0)).map_err(|e| EnclaveError::Internal(e.to_string()))
    }

    pub fn provision_policy(&self, response: &ProvisioningResponse) -> Result<ProvisionedPolicy, EnclaveError> {
        let mut f = expect_fields(self.call(&EcallRequest::ProvisionPolicy { response: response.to_bytes() })?, 2)?;
        let vocabulary = vocabulary(f.pop().expect("two fields"))?;
        Ok(ProvisionedPolicy { sealed: f.pop().expect("two fields"), vocabulary })
    }

    /// With `sealed`, keys and policy are unsealed for this call only.
    pub fn encrypt(
        &self,
        input: &str,
        output: &str,
        sealed: Option<(&SealedKeys, &[u8])>,
    ) -> Result<EncryptOutcome, EnclaveError> {
        let req = EcallRequest::Encrypt {
            input: input.to_string(),
            output: output.to_string(),
            sealed: sealed.map(|(k, p)| (k.clone(), p.to_vec())),
        };
        let mut f = expect_fields(self.call(&req)?, 2)?;
        let digest = f
            .pop()
            .expect("two fields")
            .try_into()
            .map_err(|_| EnclaveError::Internal("digest must be 32 bytes".into()))?;
        Ok(EncryptOutcome { output: string(f.pop().expect("two fields"))?, digest })
    }

    pub fn decrypt(
        &self,
        attributes: &str,
        input: &str,
        output: &str,
        sealed: Option<&SealedKeys>,
    ) -> Result<String, EnclaveError> {
        let req = EcallRequest::Decrypt {
            attributes: attributes.to_string(),
            input: input.to_string(),
            output: output.to_string(),
            sealed: sealed.cloned(),
        };
        let mut f = expect_fields(self.call(&req)?, 1)?;
        string(f.remove(0))
    }

    /// Serialized user key for `attributes`.
    pub fn keygen(&self, attributes: &str) -> Result<Vec<u8>, EnclaveError> {
        let mut f = expect_fields(self.call(&EcallRequest::Keygen { attributes: attributes.to_string() })?, 1)?;
        Ok(f.remove(0))
    }
}
