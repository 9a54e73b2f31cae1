//! Chat exchange units and their canonical, content-addressable form.
//!
//! Every request can be rendered to a byte-stable canonical serialization;
//! its SHA-256 is the key used by the cache, the transcript store and the
//! replay backend. The canonical form covers the model, message roles and
//! texts, attachment digests (not the raw base64), temperature and
//! max_tokens. The free-form `tag` is observability metadata and is
//! deliberately excluded.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::BackendError;

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

/// Image payload carried by a message. The digest is the SHA-256 of the raw
/// image bytes and stands in for the base64 body in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAttachment {
    pub media_type: String,
    pub base64_data: String,
    pub digest: String,
}

impl ImageAttachment {
    pub fn from_bytes(bytes: &[u8], media_type: impl Into<String>) -> Self {
        use base64::Engine as _;
        ImageAttachment {
            media_type: media_type.into(),
            base64_data: base64::engine::general_purpose::STANDARD.encode(bytes),
            digest: hex::encode(Sha256::digest(bytes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageAttachment>,
}

impl Message {
    pub fn system(text: impl Into<String>) -> Self {
        Message { role: Role::System, text: text.into(), image: None }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Message { role: Role::User, text: text.into(), image: None }
    }

    pub fn user_with_image(text: impl Into<String>, image: ImageAttachment) -> Self {
        Message { role: Role::User, text: text.into(), image: Some(image) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Names the pipeline stage (and item) that issued the request.
    /// Excluded from the canonical serialization and the cache key.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<Message>, tag: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            tag: tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} is negative or NaN",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        let attachments = self.messages.iter().filter(|m| m.image.is_some()).count();
        if attachments > 1 {
            return Err(BackendError::InvalidRequest(format!(
                "{attachments} image attachments, at most one allowed"
            )));
        }
        Ok(())
    }

    /// Byte-stable canonical serialization. Variable-length fields are
    /// length-prefixed so no text content can masquerade as framing.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        fn push_field(out: &mut Vec<u8>, name: &str, value: &str) {
            out.extend_from_slice(name.as_bytes());
            out.push(b':');
            out.extend_from_slice(value.len().to_string().as_bytes());
            out.push(b':');
            out.extend_from_slice(value.as_bytes());
            out.push(b'\n');
        }

        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(b"insight-chat-request-v1\n");
        push_field(&mut out, "model", &self.model);
        push_field(&mut out, "temperature", &format!("{:?}", self.temperature));
        push_field(&mut out, "max_tokens", &self.max_tokens.to_string());
        push_field(&mut out, "messages", &self.messages.len().to_string());
        for (i, msg) in self.messages.iter().enumerate() {
            push_field(&mut out, &format!("m{i}.role"), msg.role.as_str());
            push_field(&mut out, &format!("m{i}.text"), &msg.text);
            let image = msg.image.as_ref().map(|a| a.digest.as_str()).unwrap_or("none");
            push_field(&mut out, &format!("m{i}.image"), image);
        }
        out
    }

    pub fn canonical_string(&self) -> String {
        String::from_utf8(self.canonical_bytes()).expect("canonical form is UTF-8")
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn cache_key(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

impl FinishReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FinishReason::Stop => "stop",
            FinishReason::Length => "length",
            FinishReason::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stop" => Some(FinishReason::Stop),
            "length" => Some(FinishReason::Length),
            "error" => Some(FinishReason::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    #[serde(default)]
    pub from_cache: bool,
}

impl ChatResponse {
    pub fn stopped(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            usage: None,
            from_cache: false,
        }
    }
}
