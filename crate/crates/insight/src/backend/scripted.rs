//! Rule-driven backend for tests and offline fixtures: match on the request
//! tag and/or message content, answer with a canned string.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::request::{ChatRequest, ChatResponse};
use super::{Backend, BackendError};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Matches when the request tag starts with this prefix. Empty matches all.
    #[serde(default)]
    pub tag_prefix: String,
    /// Every string must appear somewhere in the concatenated message texts.
    #[serde(default)]
    pub contains: Vec<String>,
    pub response: String,
}

impl ScriptRule {
    fn matches(&self, request: &ChatRequest) -> bool {
        if !request.tag.starts_with(&self.tag_prefix) {
            return false;
        }
        if self.contains.is_empty() {
            return true;
        }
        let haystack: String =
            request.messages.iter().map(|m| m.text.as_str()).collect::<Vec<_>>().join("\n");
        self.contains.iter().all(|needle| haystack.contains(needle))
    }
}

type ScriptFn = dyn Fn(&ChatRequest) -> Option<String> + Send + Sync;

pub struct ScriptedBackend {
    script: Box<ScriptFn>,
    calls: AtomicU64,
}

impl ScriptedBackend {
    /// Answer every request with the same text.
    pub fn constant(text: impl Into<String>) -> Self {
        let text = text.into();
        ScriptedBackend::with_fn(move |_| Some(text.clone()))
    }

    /// First matching rule wins; no match is a protocol error.
    pub fn from_rules(rules: Vec<ScriptRule>) -> Self {
        ScriptedBackend::with_fn(move |req| {
            rules.iter().find(|r| r.matches(req)).map(|r| r.response.clone())
        })
    }

    pub fn from_rules_file(path: &Path) -> Result<Self, BackendError> {
        let bytes = std::fs::read(path)?;
        let rules: Vec<ScriptRule> = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::Protocol(format!("bad script file: {e}")))?;
        Ok(ScriptedBackend::from_rules(rules))
    }

    pub fn with_fn(f: impl Fn(&ChatRequest) -> Option<String> + Send + Sync + 'static) -> Self {
        ScriptedBackend { script: Box::new(f), calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        match (self.script)(request) {
            Some(text) => Ok(ChatResponse::stopped(text)),
            None => Err(BackendError::Protocol(format!(
                "scripted backend has no rule for tag {:?}",
                request.tag
            ))),
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
