//! Verifier reached over HTTP, speaking the same frames as `/attest/*`.

use std::time::Duration;

use cpabe_enclave::attestation::{
    encode_submission, AttestationChallenge, AttestationError, ProvisioningResponse, Quote, VerifierChannel,
};

pub struct HttpVerifier {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpVerifier {
    pub fn new(base_url: &str) -> Result<Self, AttestationError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| AttestationError::Transport(e.to_string()))?;
        Ok(Self { base: base_url.trim_end_matches('/').to_string(), client })
    }

    fn post(&self, path: &str, body: Vec<u8>) -> Result<Vec<u8>, AttestationError> {
        let transport = |e: reqwest::Error| AttestationError::Transport(e.to_string());
        let resp = self
            .client
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/octet-stream")
            .body(body)
            .send()
            .map_err(transport)?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(transport)?;
        if !status.is_success() {
            return Err(AttestationError::Transport(format!("{path}: {status}: {}", String::from_utf8_lossy(&bytes))));
        }
        Ok(bytes.to_vec())
    }
}

impl VerifierChannel for HttpVerifier {
    fn challenge(&self) -> Result<AttestationChallenge, AttestationError> {
        Ok(AttestationChallenge::from_bytes(&self.post("/attest/challenge", Vec::new())?)?)
    }

    fn submit(
        &self,
        challenge: &AttestationChallenge,
        quote: &Quote,
    ) -> Result<ProvisioningResponse, AttestationError> {
        let body = self.post("/attest/quote", encode_submission(challenge, quote))?;
        ProvisioningResponse::from_bytes(&body).map_err(|e| AttestationError::Transport(e.to_string()))
    }
}
