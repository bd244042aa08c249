//! On-disk layout and the OCALL backend the enclave reads and writes through.
//!
//! ```text
//! <root>/containers/{file_id}.cpsx   ciphertext containers
//! <root>/containers/{file_id}.json   listing metadata
//! <root>/sealed/{pub,master,policy}.seal
//! <root>/staging/{token}             decrypted bytes awaiting download
//! ```
//!
//! Uploaded plaintext never touches the disk: it is parked in memory under an
//! `upload:` resource and taken by the enclave's single read.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use cpabe_enclave::{OcallError, OcallHandler, SealedKeys};
use serde::{Deserialize, Serialize};

pub const UPLOAD_PREFIX: &str = "upload:";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StoredFile {
    pub file_id: String,
    pub filename: String,
    pub size: u64,
    /// Milliseconds since the unix epoch.
    pub created: u64,
}

#[derive(Debug)]
pub struct Storage {
    root: PathBuf,
    uploads: Mutex<HashMap<String, Vec<u8>>>,
}

/// Writes to a hidden sibling, fsyncs, then renames over `path`.
pub fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{:016x}.tmp", rand::random::<u64>()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_')
}

impl Storage {
    pub fn open(root: &Path) -> io::Result<Self> {
        for dir in ["containers", "sealed", "staging"] {
            fs::create_dir_all(root.join(dir))?;
        }
        let storage = Self { root: root.to_path_buf(), uploads: Mutex::new(HashMap::new()) };
        storage.clean_leftovers()?;
        Ok(storage)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Staged plaintext and temp files cannot outlive the process that made
    /// them: tokens are in memory only.
    fn clean_leftovers(&self) -> io::Result<()> {
        for entry in fs::read_dir(self.root.join("staging"))? {
            fs::remove_file(entry?.path())?;
        }
        for dir in ["containers", "sealed"] {
            for entry in fs::read_dir(self.root.join(dir))? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) == Some("tmp") {
                    fs::remove_file(path)?;
                }
            }
        }
        Ok(())
    }

    /// Maps an enclave resource name to a path, allowing only the two data
    /// directories.
    fn resolve(&self, resource: &str) -> Option<PathBuf> {
        let (dir, name) = resource.split_once('/')?;
        (matches!(dir, "containers" | "staging") && valid_name(name)).then(|| self.root.join(dir).join(name))
    }

    pub fn container_resource(file_id: &str) -> String {
        format!("containers/{file_id}.cpsx")
    }

    pub fn staging_resource(token: &str) -> String {
        format!("staging/{token}")
    }

    pub fn container_path(&self, file_id: &str) -> PathBuf {
        self.root.join("containers").join(format!("{file_id}.cpsx"))
    }

    pub fn staging_path(&self, token: &str) -> PathBuf {
        self.root.join("staging").join(token)
    }

    pub fn park_upload(&self, id: &str, data: Vec<u8>) -> String {
        let resource = format!("{UPLOAD_PREFIX}{id}");
        self.uploads.lock().expect("uploads lock").insert(resource.clone(), data);
        resource
    }

    pub fn discard_upload(&self, resource: &str) {
        self.uploads.lock().expect("uploads lock").remove(resource);
    }

    pub fn save_metadata(&self, file: &StoredFile) -> io::Result<()> {
        let path = self.root.join("containers").join(format!("{}.json", file.file_id));
        write_atomic(&path, &serde_json::to_vec_pretty(file).map_err(io::Error::other)?)
    }

    /// Every stored file whose metadata and container are both present.
    pub fn load_metadata(&self) -> io::Result<Vec<StoredFile>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("containers"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            match serde_json::from_slice::<StoredFile>(&fs::read(&path)?) {
                Ok(f) if self.container_path(&f.file_id).exists() => out.push(f),
                Ok(f) => log::warn!("metadata for {} has no container", f.file_id),
                Err(e) => log::warn!("skipping unreadable metadata {}: {e}", path.display()),
            }
        }
        Ok(out)
    }

    fn sealed_path(&self, name: &str) -> PathBuf {
        self.root.join("sealed").join(format!("{name}.seal"))
    }

    pub fn load_sealed_keys(&self) -> io::Result<Option<SealedKeys>> {
        let (p, m) = (self.sealed_path("pub"), self.sealed_path("master"));
        if !p.exists() || !m.exists() {
            return Ok(None);
        }
        Ok(Some(SealedKeys { public: fs::read(p)?, master: fs::read(m)? }))
    }

    pub fn save_sealed_keys(&self, keys: &SealedKeys) -> io::Result<()> {
        write_atomic(&self.sealed_path("pub"), &keys.public)?;
        write_atomic(&self.sealed_path("master"), &keys.master)
    }

    pub fn load_sealed_policy(&self) -> io::Result<Option<Vec<u8>>> {
        let p = self.sealed_path("policy");
        p.exists().then(|| fs::read(p)).transpose()
    }

    pub fn save_sealed_policy(&self, blob: &[u8]) -> io::Result<()> {
        write_atomic(&self.sealed_path("policy"), blob)
    }

    pub fn audit(&self, event: &str, file_id: &str, detail: &str) {
        let line = format!("{} {event} file={file_id} {detail}\n", crate::now_ms());
        log::warn!(target: "audit", "{}", line.trim_end());
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("audit.log"))
            .and_then(|mut f| f.write_all(line.as_bytes()));
        if let Err(e) = written {
            log::error!("cannot append audit log: {e}");
        }
    }
}

impl OcallHandler for Storage {
    fn read_input(&self, resource: &str) -> Result<Vec<u8>, OcallError> {
        if resource.starts_with(UPLOAD_PREFIX) {
            return self
                .uploads
                .lock()
                .expect("uploads lock")
                .remove(resource)
                .ok_or_else(|| OcallError::new("read", resource, "no such upload"));
        }
        let path = self.resolve(resource).ok_or_else(|| OcallError::new("read", resource, "invalid resource"))?;
        fs::read(path).map_err(|e| OcallError::new("read", resource, e.to_string()))
    }

    fn write_output(&self, resource: &str, data: &[u8]) -> Result<(), OcallError> {
        let path = self.resolve(resource).ok_or_else(|| OcallError::new("write", resource, "invalid resource"))?;
        write_atomic(&path, data).map_err(|e| OcallError::new("write", resource, e.to_string()))
    }
}
