//! Uniform MLLM access layer.
//!
//! A [`Backend`] turns a [`ChatRequest`] into a [`ChatResponse`]. Four
//! implementations cover the pipeline's needs:
//!
//! - [`LiveBackend`]: OpenAI-compatible `/v1/chat/completions` over HTTP,
//!   with retries and a bounded in-flight limit.
//! - [`DiskCache`]: content-addressed response cache wrapped around any
//!   inner backend; hits never touch the inner backend.
//! - [`ReplayBackend`]: serves a recorded transcript and never touches the
//!   network; a missing key is a test-fixture gap, not a silent fallthrough.
//! - [`ScriptedBackend`]: rule-driven responses for tests and fixtures.
//!
//! [`RecordingBackend`] tees any backend's exchanges into a transcript
//! directory so a run can later be replayed byte-identically.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod cache;
mod live;
mod record;
mod replay;
pub mod request;
mod scripted;
mod store;

pub use cache::DiskCache;
pub use live::LiveBackend;
pub use record::RecordingBackend;
pub use replay::ReplayBackend;
pub use request::{
    ChatRequest, ChatResponse, FinishReason, ImageAttachment, Message, Role, TokenUsage,
    DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE,
};
pub use scripted::{ScriptRule, ScriptedBackend};
pub use store::{EntryStore, StoredEntry};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("network failure after retries: {0}")]
    Network(String),
    #[error("malformed endpoint response: {0}")]
    Protocol(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("replay transcript has no entry for key {key} (tag {tag})")]
    ReplayMiss { key: String, tag: String },
    #[error("corrupt transcript entry at {path}: {detail}")]
    CorruptTranscript { path: PathBuf, detail: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BackendError {
    /// Transport-level failures are worth retrying; protocol and auth
    /// failures are not.
    pub fn is_transient(&self) -> bool {
        matches!(self, BackendError::Network(_))
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;

    fn name(&self) -> &str;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, backoff_ms: 250 }
    }
}

impl RetryPolicy {
    /// Run `op`, retrying transient failures with exponential backoff.
    /// Non-transient errors surface immediately.
    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, BackendError>,
    ) -> Result<T, BackendError> {
        let attempts = self.max_attempts.max(1);
        let mut last = None;
        for attempt in 0..attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() => {
                    if attempt + 1 < attempts && self.backoff_ms > 0 {
                        let delay = self.backoff_ms.saturating_mul(1 << attempt.min(16));
                        std::thread::sleep(std::time::Duration::from_millis(delay));
                    }
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or_else(|| BackendError::Network("no attempts made".into())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub transcript_dir: Option<PathBuf>,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    /// When set, every exchange is also written here as a transcript entry.
    #[serde(default)]
    pub record_dir: Option<PathBuf>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_api_key_env() -> String {
    "INSIGHT_API_KEY".to_string()
}

fn default_max_in_flight() -> usize {
    4
}

impl BackendConfig {
    pub fn replay(transcript_dir: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Replay,
            endpoint: None,
            api_key_env: default_api_key_env(),
            cache_dir: None,
            transcript_dir: Some(transcript_dir.into()),
            script_path: None,
            record_dir: None,
            retry: RetryPolicy::default(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn live(endpoint: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        BackendConfig {
            kind: BackendKind::Live,
            endpoint: Some(endpoint.into()),
            api_key_env: default_api_key_env(),
            cache_dir: Some(cache_dir.into()),
            transcript_dir: None,
            script_path: None,
            record_dir: None,
            retry: RetryPolicy::default(),
            max_in_flight: default_max_in_flight(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self.kind {
            BackendKind::Live if self.endpoint.is_none() => Err(BackendError::InvalidRequest(
                "live backend requires an endpoint".into(),
            )),
            BackendKind::Replay if self.transcript_dir.is_none() => Err(
                BackendError::InvalidRequest("replay backend requires a transcript_dir".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Build the configured backend stack: inner backend, then the cache
    /// (except around replay, which is already a store), then the optional
    /// recorder.
    pub fn build(&self) -> Result<Box<dyn Backend>, BackendError> {
        self.validate()?;
        let inner: Box<dyn Backend> = match self.kind {
            BackendKind::Live => Box::new(LiveBackend::new(
                self.endpoint.clone().expect("validated"),
                self.api_key_env.clone(),
                self.retry,
                self.max_in_flight,
            )),
            BackendKind::Replay => Box::new(ReplayBackend::load(
                self.transcript_dir.as_ref().expect("validated"),
            )?),
            BackendKind::Scripted => {
                let scripted = match &self.script_path {
                    Some(path) => ScriptedBackend::from_rules_file(path)?,
                    None => ScriptedBackend::constant(""),
                };
                Box::new(scripted)
            }
        };
        let cached: Box<dyn Backend> = match (&self.cache_dir, self.kind) {
            (Some(dir), BackendKind::Live | BackendKind::Scripted) => {
                Box::new(DiskCache::new(dir, inner))
            }
            _ => inner,
        };
        Ok(match &self.record_dir {
            Some(dir) => Box::new(RecordingBackend::new(dir, cached)),
            None => cached,
        })
    }
}

/// Wraps a backend and counts completions; used for per-item call budgets
/// and call-count assertions in tests.
pub struct CountingBackend<B> {
    inner: B,
    calls: AtomicU64,
}

impl<B: Backend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for CountingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
