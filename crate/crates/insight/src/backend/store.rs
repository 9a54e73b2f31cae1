//! On-disk entry store shared by the response cache and replay transcripts.
//!
//! One JSON file per key under a two-level directory fan-out
//! (`<root>/ab/cd/<key>.json`). Entries are self-checking: the checksum is
//! the SHA-256 of the response text, so a tampered payload is detected on
//! read. Writes go through a temp file and an atomic rename so concurrent
//! writers of the same key converge to one valid entry.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::request::{ChatRequest, ChatResponse, FinishReason};
use super::BackendError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEntry {
    pub key: String,
    pub request_canonical: String,
    pub response_text: String,
    pub finish_reason: String,
    pub checksum: String,
}

impl StoredEntry {
    pub fn from_exchange(request: &ChatRequest, response: &ChatResponse) -> Self {
        StoredEntry {
            key: request.cache_key(),
            request_canonical: request.canonical_string(),
            response_text: response.text.clone(),
            finish_reason: response.finish_reason.as_str().to_string(),
            checksum: hex::encode(Sha256::digest(response.text.as_bytes())),
        }
    }

    pub fn verify(&self, path: &Path) -> Result<(), BackendError> {
        let expected = hex::encode(Sha256::digest(self.response_text.as_bytes()));
        if expected != self.checksum {
            return Err(BackendError::CorruptTranscript {
                path: path.to_path_buf(),
                detail: "checksum does not match response_text".into(),
            });
        }
        Ok(())
    }

    pub fn to_response(&self, from_cache: bool) -> Result<ChatResponse, BackendError> {
        let finish_reason = FinishReason::parse(&self.finish_reason).ok_or_else(|| {
            BackendError::Protocol(format!("unknown finish_reason {:?}", self.finish_reason))
        })?;
        Ok(ChatResponse { text: self.response_text.clone(), finish_reason, usage: None, from_cache })
    }
}

#[derive(Debug, Clone)]
pub struct EntryStore {
    root: PathBuf,
}

impl EntryStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        EntryStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        let (a, b) = if key.len() >= 4 { (&key[0..2], &key[2..4]) } else { ("xx", "xx") };
        self.root.join(a).join(b).join(format!("{key}.json"))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entry_path(key).is_file()
    }

    pub fn read(&self, key: &str) -> Result<Option<StoredEntry>, BackendError> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(BackendError::Io(e)),
        };
        let entry: StoredEntry = serde_json::from_slice(&bytes).map_err(|e| {
            BackendError::CorruptTranscript { path: path.clone(), detail: e.to_string() }
        })?;
        entry.verify(&path)?;
        Ok(Some(entry))
    }

    pub fn write(&self, entry: &StoredEntry) -> Result<(), BackendError> {
        use std::sync::atomic::{AtomicU64, Ordering};
        static WRITE_SEQ: AtomicU64 = AtomicU64::new(0);

        let path = self.entry_path(&entry.key);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension(format!(
            "tmp.{}.{}",
            std::process::id(),
            WRITE_SEQ.fetch_add(1, Ordering::Relaxed)
        ));
        let body = serde_json::to_vec_pretty(entry)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Walk every entry under the root, verifying checksums along the way.
    pub fn scan(&self) -> Result<Vec<StoredEntry>, BackendError> {
        let mut entries = Vec::new();
        if !self.root.exists() {
            return Ok(entries);
        }
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for child in std::fs::read_dir(&dir)? {
                let child = child?;
                let path = child.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.extension().is_some_and(|e| e == "json") {
                    let bytes = std::fs::read(&path)?;
                    let entry: StoredEntry = serde_json::from_slice(&bytes).map_err(|e| {
                        BackendError::CorruptTranscript { path: path.clone(), detail: e.to_string() }
                    })?;
                    entry.verify(&path)?;
                    entries.push(entry);
                }
            }
        }
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(entries)
    }

    pub fn len(&self) -> Result<usize, BackendError> {
        Ok(self.scan()?.len())
    }

    pub fn is_empty(&self) -> Result<bool, BackendError> {
        Ok(self.len()? == 0)
    }

    pub fn clear(&self) -> Result<(), BackendError> {
        if self.root.exists() {
            std::fs::remove_dir_all(&self.root)?;
        }
        Ok(())
    }
}
