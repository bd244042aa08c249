//! Callbacks from the enclave to untrusted code, and transcript recording of
//! everything that crosses the boundary.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("ocall {op} on {resource:?} failed: {reason}")]
pub struct OcallError {
    pub op: &'static str,
    pub resource: String,
    pub reason: String,
}

impl OcallError {
    pub fn new(op: &'static str, resource: &str, reason: impl Into<String>) -> Self {
        Self { op, resource: resource.to_string(), reason: reason.into() }
    }
}

/// Untrusted I/O the enclave may request. Calls arrive one at a time, from
/// inside the single in-flight ECALL.
pub trait OcallHandler: Send + Sync {
    fn read_input(&self, resource: &str) -> Result<Vec<u8>, OcallError>;
    fn write_output(&self, resource: &str, data: &[u8]) -> Result<(), OcallError>;
}

impl<T: OcallHandler + ?Sized> OcallHandler for Arc<T> {
    fn read_input(&self, resource: &str) -> Result<Vec<u8>, OcallError> {
        (**self).read_input(resource)
    }

    fn write_output(&self, resource: &str, data: &[u8]) -> Result<(), OcallError> {
        (**self).write_output(resource, data)
    }
}

/// In-memory resource map.
#[derive(Debug, Default)]
pub struct MemoryStore {
    resources: Mutex<HashMap<String, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&self, resource: &str, data: Vec<u8>) {
        self.resources.lock().expect("store lock").insert(resource.to_string(), data);
    }

    pub fn take(&self, resource: &str) -> Option<Vec<u8>> {
        self.resources.lock().expect("store lock").remove(resource)
    }

    pub fn get(&self, resource: &str) -> Option<Vec<u8>> {
        self.resources.lock().expect("store lock").get(resource).cloned()
    }

    pub fn contains(&self, resource: &str) -> bool {
        self.resources.lock().expect("store lock").contains_key(resource)
    }

    pub fn len(&self) -> usize {
        self.resources.lock().expect("store lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl OcallHandler for MemoryStore {
    fn read_input(&self, resource: &str) -> Result<Vec<u8>, OcallError> {
        self.get(resource).ok_or_else(|| OcallError::new("read_input", resource, "no such resource"))
    }

    fn write_output(&self, resource: &str, data: &[u8]) -> Result<(), OcallError> {
        self.put(resource, data.to_vec());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    EcallRequest,
    EcallResponse,
    /// Data handed into the enclave by `read_input`.
    OcallIn,
    /// Data handed out of the enclave through `write_output`.
    OcallOut,
}

#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub bytes: Vec<u8>,
}

/// Append-only log of boundary traffic.
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn record(&self, direction: Direction, bytes: &[u8]) {
        self.entries.lock().expect("transcript lock").push(TranscriptEntry { direction, bytes: bytes.to_vec() });
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    /// Number of entries whose bytes contain `needle`.
    pub fn occurrences(&self, needle: &[u8]) -> usize {
        assert!(!needle.is_empty());
        self.entries
            .lock()
            .expect("transcript lock")
            .iter()
            .filter(|e| e.bytes.windows(needle.len()).any(|w| w == needle))
            .count()
    }
}

/// Wraps a handler and records every payload it moves.
pub struct RecordingOcalls<H> {
    inner: H,
    transcript: Arc<Transcript>,
}

impl<H: OcallHandler> RecordingOcalls<H> {
    pub fn new(inner: H, transcript: Arc<Transcript>) -> Self {
        Self { inner, transcript }
    }
}

impl<H: OcallHandler> OcallHandler for RecordingOcalls<H> {
    fn read_input(&self, resource: &str) -> Result<Vec<u8>, OcallError> {
        let data = self.inner.read_input(resource)?;
        self.transcript.record(Direction::OcallIn, &data);
        Ok(data)
    }

    fn write_output(&self, resource: &str, data: &[u8]) -> Result<(), OcallError> {
        self.transcript.record(Direction::OcallOut, data);
        self.inner.write_output(resource, data)
    }
}
