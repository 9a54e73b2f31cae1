//! Content-addressed response cache. A hit returns the stored response with
//! `from_cache=true` and issues no inner call; a miss forwards to the inner
//! backend and persists the exchange before returning it.

use std::path::Path;

use super::request::{ChatRequest, ChatResponse};
use super::store::{EntryStore, StoredEntry};
use super::{Backend, BackendError};

pub struct DiskCache<B> {
    store: EntryStore,
    inner: B,
}

impl<B: Backend> DiskCache<B> {
    pub fn new(dir: impl AsRef<Path>, inner: B) -> Self {
        DiskCache { store: EntryStore::new(dir.as_ref()), inner }
    }

    pub fn store(&self) -> &EntryStore {
        &self.store
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for DiskCache<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let key = request.cache_key();
        if let Some(entry) = self.store.read(&key)? {
            return entry.to_response(true);
        }
        let response = self.inner.complete(request)?;
        self.store.write(&StoredEntry::from_exchange(request, &response))?;
        Ok(response)
    }

    fn name(&self) -> &str {
        "cache"
    }
}
