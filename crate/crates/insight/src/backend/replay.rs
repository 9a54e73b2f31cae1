//! Deterministic offline backend: serves a recorded transcript keyed by the
//! canonical request digest. Never touches the network; a missing key is a
//! [`BackendError::ReplayMiss`] signalling a fixture gap.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::request::{ChatRequest, ChatResponse};
use super::store::EntryStore;
use super::{Backend, BackendError};

pub struct ReplayBackend {
    entries: HashMap<String, ChatResponse>,
    root: PathBuf,
    lookups: AtomicU64,
}

impl ReplayBackend {
    /// Load and checksum-verify every entry in the transcript directory.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BackendError> {
        let root = dir.as_ref().to_path_buf();
        let store = EntryStore::new(&root);
        let mut entries = HashMap::new();
        for entry in store.scan()? {
            let response = entry.to_response(true)?;
            entries.insert(entry.key, response);
        }
        Ok(ReplayBackend { entries, root, lookups: AtomicU64::new(0) })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of completions served so far.
    pub fn lookups(&self) -> u64 {
        self.lookups.load(Ordering::SeqCst)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        self.lookups.fetch_add(1, Ordering::SeqCst);
        let key = request.cache_key();
        match self.entries.get(&key) {
            Some(response) => Ok(response.clone()),
            None => Err(BackendError::ReplayMiss { key, tag: request.tag.clone() }),
        }
    }

    fn name(&self) -> &str {
        "replay"
    }
}
