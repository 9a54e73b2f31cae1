//! OpenAI-compatible chat-completions client (`POST /v1/chat/completions`,
//! JSON body, bearer auth). Images travel as base64 data-URL content parts.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::request::{ChatRequest, ChatResponse, FinishReason, Message, TokenUsage};
use super::{Backend, BackendError, RetryPolicy};

/// Counting semaphore bounding concurrent in-flight requests per endpoint.
struct InFlightGate {
    state: Mutex<usize>,
    cond: Condvar,
    limit: usize,
}

impl InFlightGate {
    fn new(limit: usize) -> Self {
        InFlightGate { state: Mutex::new(0), cond: Condvar::new(), limit: limit.max(1) }
    }

    fn acquire(&self) -> InFlightPermit<'_> {
        let mut inflight = self.state.lock().expect("gate poisoned");
        while *inflight >= self.limit {
            inflight = self.cond.wait(inflight).expect("gate poisoned");
        }
        *inflight += 1;
        InFlightPermit { gate: self }
    }
}

struct InFlightPermit<'a> {
    gate: &'a InFlightGate,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut inflight = self.gate.state.lock().expect("gate poisoned");
        *inflight -= 1;
        self.gate.cond.notify_one();
    }
}

pub struct LiveBackend {
    endpoint: String,
    api_key_env: String,
    retry: RetryPolicy,
    gate: InFlightGate,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(
        endpoint: impl Into<String>,
        api_key_env: impl Into<String>,
        retry: RetryPolicy,
        max_in_flight: usize,
    ) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .expect("reqwest client");
        LiveBackend {
            endpoint: endpoint.into(),
            api_key_env: api_key_env.into(),
            retry,
            gate: InFlightGate::new(max_in_flight),
            client,
        }
    }

    fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|v| !v.is_empty())
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/v1/chat/completions")
        }
    }

    fn message_json(message: &Message) -> Value {
        match &message.image {
            None => json!({ "role": message.role.as_str(), "content": message.text }),
            Some(img) => json!({
                "role": message.role.as_str(),
                "content": [
                    { "type": "text", "text": message.text },
                    {
                        "type": "image_url",
                        "image_url": {
                            "url": format!("data:{};base64,{}", img.media_type, img.base64_data)
                        }
                    }
                ]
            }),
        }
    }

    fn body(request: &ChatRequest) -> Value {
        json!({
            "model": request.model,
            "messages": request.messages.iter().map(Self::message_json).collect::<Vec<_>>(),
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }

    fn exchange_once(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut call = self.client.post(self.url()).json(&Self::body(request));
        if let Some(key) = self.api_key() {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| BackendError::Network(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Network(e.to_string()))?;

        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("{status}: {text}")));
        }
        if status.as_u16() == 408 || status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Network(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Protocol(format!("{status}: {text}")));
        }
        Self::parse_completion(&text)
    }

    fn parse_completion(body: &str) -> Result<ChatResponse, BackendError> {
        let value: Value = serde_json::from_str(body)
            .map_err(|e| BackendError::Protocol(format!("invalid JSON: {e}")))?;
        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| BackendError::Protocol("no choices in response".into()))?;
        let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
            Some("stop") | None => FinishReason::Stop,
            Some("length") => FinishReason::Length,
            Some(_) => FinishReason::Error,
        };
        let text = choice
            .get("message")
            .and_then(|m| m.get("content"))
            .and_then(Value::as_str)
            .map(str::to_string);
        let text = match (text, finish_reason) {
            (Some(t), _) => t,
            (None, FinishReason::Stop) => {
                return Err(BackendError::Protocol("finish_reason=stop without content".into()))
            }
            (None, _) => String::new(),
        };
        let usage = value.get("usage").and_then(|u| {
            Some(TokenUsage {
                prompt_tokens: u.get("prompt_tokens")?.as_u64()? as u32,
                completion_tokens: u.get("completion_tokens")?.as_u64()? as u32,
            })
        });
        Ok(ChatResponse { text, finish_reason, usage, from_cache: false })
    }
}

impl Backend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        request.validate()?;
        let _permit = self.gate.acquire();
        self.retry.run(|| self.exchange_once(request))
    }

    fn name(&self) -> &str {
        "live"
    }
}
