//! ECALL wire format.
//!
//! Request: `opcode:u8` followed by fields, each a 4-byte big-endian length
//! and that many bytes. Response: `status:u8` followed by fields in the same
//! framing. Error responses carry `[detail:u8] [message]`.

use cpabe_core::codec::{decode_fields, Writer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Setup = 0x01,
    ProvisionPolicy = 0x02,
    Encrypt = 0x03,
    Decrypt = 0x04,
    Keygen = 0x05,
    Quote = 0x06,
    Restore = 0x07,
}

impl TryFrom<u8> for Opcode {
    type Error = EnclaveError;

    fn try_from(b: u8) -> Result<Self, EnclaveError> {
        Ok(match b {
            0x01 => Opcode::Setup,
            0x02 => Opcode::ProvisionPolicy,
            0x03 => Opcode::Encrypt,
            0x04 => Opcode::Decrypt,
            0x05 => Opcode::Keygen,
            0x06 => Opcode::Quote,
            0x07 => Opcode::Restore,
            other => return Err(EnclaveError::UnknownOpcode(other)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StateErrorKind {
    NoKeys = 1,
    NoPolicy = 2,
    /// No pending attestation key: provisioning needs a fresh quote.
    NotAttested = 3,
}

impl StateErrorKind {
    fn from_u8(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::NoKeys),
            2 => Some(Self::NoPolicy),
            3 => Some(Self::NotAttested),
            _ => None,
        }
    }
}

/// Everything an ECALL can fail with. Crosses the boundary as a status byte.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnclaveError {
    #[error("unknown opcode 0x{0:02x}")]
    UnknownOpcode(u8),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("enclave state error: {0:?}")]
    State(StateErrorKind),
    #[error("access denied")]
    AccessDenied,
    #[error("authentication failure")]
    AuthenticationFailure,
    #[error("seal error: {0}")]
    Seal(String),
    #[error("ocall failure: {0}")]
    OcallFailure(String),
    #[error("bad policy: {0}")]
    BadPolicy(String),
    #[error("enclave already set up")]
    AlreadySetUp,
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("policy provisioning failed: {0}")]
    ProvisioningFailed(String),
    #[error("internal enclave error: {0}")]
    Internal(String),
}

pub const STATUS_OK: u8 = 0;

impl EnclaveError {
    pub fn status(&self) -> u8 {
        match self {
            EnclaveError::UnknownOpcode(_) => 1,
            EnclaveError::MalformedFrame(_) => 2,
            EnclaveError::State(_) => 3,
            EnclaveError::AccessDenied => 4,
            EnclaveError::AuthenticationFailure => 5,
            EnclaveError::Seal(_) => 6,
            EnclaveError::OcallFailure(_) => 7,
            EnclaveError::BadPolicy(_) => 8,
            EnclaveError::AlreadySetUp => 9,
            EnclaveError::MalformedContainer(_) => 10,
            EnclaveError::ProvisioningFailed(_) => 11,
            EnclaveError::Internal(_) => 12,
        }
    }

    fn detail(&self) -> u8 {
        match self {
            EnclaveError::UnknownOpcode(op) => *op,
            EnclaveError::State(kind) => *kind as u8,
            _ => 0,
        }
    }

    fn message(&self) -> String {
        match self {
            EnclaveError::MalformedFrame(m)
            | EnclaveError::Seal(m)
            | EnclaveError::OcallFailure(m)
            | EnclaveError::BadPolicy(m)
            | EnclaveError::MalformedContainer(m)
            | EnclaveError::ProvisioningFailed(m)
            | EnclaveError::Internal(m) => m.clone(),
            _ => String::new(),
        }
    }

    fn from_wire(status: u8, detail: u8, message: String) -> Self {
        match status {
            1 => EnclaveError::UnknownOpcode(detail),
            2 => EnclaveError::MalformedFrame(message),
            3 => match StateErrorKind::from_u8(detail) {
                Some(kind) => EnclaveError::State(kind),
                None => EnclaveError::Internal(format!("unknown state error {detail}")),
            },
            4 => EnclaveError::AccessDenied,
            5 => EnclaveError::AuthenticationFailure,
            6 => EnclaveError::Seal(message),
            7 => EnclaveError::OcallFailure(message),
            8 => EnclaveError::BadPolicy(message),
            9 => EnclaveError::AlreadySetUp,
            10 => EnclaveError::MalformedContainer(message),
            11 => EnclaveError::ProvisioningFailed(message),
            12 => EnclaveError::Internal(message),
            other => EnclaveError::Internal(format!("unknown status {other}")),
        }
    }
}

/// Sealed key material passed along with a request, for callers that keep the
/// enclave stateless between calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedKeys {
    pub public: Vec<u8>,
    pub master: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EcallRequest {
    Setup,
    Restore { keys: SealedKeys, policy: Option<Vec<u8>> },
    Quote { challenge_nonce: [u8; 16] },
    ProvisionPolicy { response: Vec<u8> },
    Encrypt { input: String, output: String, sealed: Option<(SealedKeys, Vec<u8>)> },
    Decrypt { attributes: String, input: String, output: String, sealed: Option<SealedKeys> },
    Keygen { attributes: String },
}

fn utf8(b: &[u8], what: &str) -> Result<String, EnclaveError> {
    String::from_utf8(b.to_vec()).map_err(|_| EnclaveError::MalformedFrame(format!("{what} is not utf-8")))
}

impl EcallRequest {
    pub fn opcode(&self) -> Opcode {
        match self {
            EcallRequest::Setup => Opcode::Setup,
            EcallRequest::Restore { .. } => Opcode::Restore,
            EcallRequest::Quote { .. } => Opcode::Quote,
            EcallRequest::ProvisionPolicy { .. } => Opcode::ProvisionPolicy,
            EcallRequest::Encrypt { .. } => Opcode::Encrypt,
            EcallRequest::Decrypt { .. } => Opcode::Decrypt,
            EcallRequest::Keygen { .. } => Opcode::Keygen,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.opcode() as u8);
        match self {
            EcallRequest::Setup => {}
            EcallRequest::Restore { keys, policy } => {
                w.field(&keys.public).field(&keys.master);
                if let Some(p) = policy {
                    w.field(p);
                }
            }
            EcallRequest::Quote { challenge_nonce } => {
                w.field(challenge_nonce);
            }
            EcallRequest::ProvisionPolicy { response } => {
                w.field(response);
            }
            EcallRequest::Encrypt { input, output, sealed } => {
                w.str(input).str(output);
                if let Some((keys, policy)) = sealed {
                    w.field(&keys.public).field(&keys.master).field(policy);
                }
            }
            EcallRequest::Decrypt { attributes, input, output, sealed } => {
                w.str(attributes).str(input).str(output);
                if let Some(keys) = sealed {
                    w.field(&keys.public).field(&keys.master);
                }
            }
            EcallRequest::Keygen { attributes } => {
                w.str(attributes);
            }
        }
        w.finish()
    }

    pub fn decode(frame: &[u8]) -> Result<Self, EnclaveError> {
        let (&op, rest) = frame.split_first().ok_or_else(|| EnclaveError::MalformedFrame("empty frame".into()))?;
        let opcode = Opcode::try_from(op)?;
        let f = decode_fields(rest).map_err(|e| EnclaveError::MalformedFrame(e.to_string()))?;
        let arity = |ok: &[usize]| {
            if ok.contains(&f.len()) {
                Ok(())
            } else {
                Err(EnclaveError::MalformedFrame(format!("{opcode:?} takes {ok:?} fields, got {}", f.len())))
            }
        };
        let keys = |i: usize| SealedKeys { public: f[i].to_vec(), master: f[i + 1].to_vec() };
        Ok(match opcode {
            Opcode::Setup => {
                arity(&[0])?;
                EcallRequest::Setup
            }
            Opcode::Restore => {
                arity(&[2, 3])?;
                EcallRequest::Restore { keys: keys(0), policy: f.get(2).map(|p| p.to_vec()) }
            }
            Opcode::Quote => {
                arity(&[1])?;
                let challenge_nonce = f[0]
                    .try_into()
                    .map_err(|_| EnclaveError::MalformedFrame("challenge nonce must be 16 bytes".into()))?;
                EcallRequest::Quote { challenge_nonce }
            }
            Opcode::ProvisionPolicy => {
                arity(&[1])?;
                EcallRequest::ProvisionPolicy { response: f[0].to_vec() }
            }
            Opcode::Encrypt => {
                arity(&[2, 5])?;
                EcallRequest::Encrypt {
                    input: utf8(f[0], "input id")?,
                    output: utf8(f[1], "output id")?,
                    sealed: (f.len() == 5).then(|| (keys(2), f[4].to_vec())),
                }
            }
            Opcode::Decrypt => {
                arity(&[3, 5])?;
                EcallRequest::Decrypt {
                    attributes: utf8(f[0], "attributes")?,
                    input: utf8(f[1], "input id")?,
                    output: utf8(f[2], "output id")?,
                    sealed: (f.len() == 5).then(|| keys(3)),
                }
            }
            Opcode::Keygen => {
                arity(&[1])?;
                EcallRequest::Keygen { attributes: utf8(f[0], "attributes")? }
            }
        })
    }
}

/// Encodes a dispatch result as a response frame.
pub fn encode_response(result: &Result<Vec<Vec<u8>>, EnclaveError>) -> Vec<u8> {
    let mut w = Writer::new();
    match result {
        Ok(fields) => {
            w.u8(STATUS_OK);
            for f in fields {
                w.field(f);
            }
        }
        Err(e) => {
            w.u8(e.status()).field(&[e.detail()]).str(&e.message());
        }
    }
    w.finish()
}

pub fn decode_response(frame: &[u8]) -> Result<Vec<Vec<u8>>, EnclaveError> {
    let (&status, rest) = frame.split_first().ok_or_else(|| EnclaveError::Internal("empty response frame".into()))?;
    let fields = decode_fields(rest).map_err(|e| EnclaveError::Internal(format!("bad response frame: {e}")))?;
    if status == STATUS_OK {
        return Ok(fields.into_iter().map(<[u8]>::to_vec).collect());
    }
    let detail = fields.first().and_then(|d| d.first()).copied().unwrap_or(0);
    let message = fields.get(1).map(|m| String::from_utf8_lossy(m).into_owned()).unwrap_or_default();
    Err(EnclaveError::from_wire(status, detail, message))
}
