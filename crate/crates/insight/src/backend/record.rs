//! Write-through recorder: persists every exchange as a transcript entry so
//! the run can be replayed later with [`super::ReplayBackend`].

use std::path::Path;

use super::request::{ChatRequest, ChatResponse};
use super::store::{EntryStore, StoredEntry};
use super::{Backend, BackendError};

pub struct RecordingBackend<B> {
    store: EntryStore,
    inner: B,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(dir: impl AsRef<Path>, inner: B) -> Self {
        RecordingBackend { store: EntryStore::new(dir.as_ref()), inner }
    }

    pub fn store(&self) -> &EntryStore {
        &self.store
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let response = self.inner.complete(request)?;
        self.store.write(&StoredEntry::from_exchange(request, &response))?;
        Ok(response)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
