//! Access path to the chat-completion model: request types, the
//! deterministic cache key, an HTTP provider for chat-completions
//! endpoints, a replay provider, and the caching/retrying gateway.

mod gateway;
mod http;
mod mock;

pub use gateway::ChatGateway;
pub use http::{parse_completion, HttpChatProvider, API_KEY_ENV};
pub use mock::{MockChatProvider, MockSession};

use std::fmt;
use std::io::Cursor;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{FindrError, Result};
use crate::limits::AttemptError;
use crate::store::{canonical_key, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MediaType {
    #[serde(rename = "image/jpeg")]
    Jpeg,
    #[serde(rename = "image/png")]
    Png,
}

impl MediaType {
    pub fn as_str(self) -> &'static str {
        match self {
            MediaType::Jpeg => "image/jpeg",
            MediaType::Png => "image/png",
        }
    }
}

impl fmt::Display for MediaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Part {
    Text(String),
    Image { data: Vec<u8>, media_type: MediaType },
}

impl Part {
    pub fn text(s: impl Into<String>) -> Self {
        Part::Text(s.into())
    }

    /// Validates that the payload decodes as the declared media type.
    pub fn image(data: Vec<u8>, media_type: MediaType) -> Result<Self> {
        let format = match media_type {
            MediaType::Jpeg => image::ImageFormat::Jpeg,
            MediaType::Png => image::ImageFormat::Png,
        };
        let mut reader = image::ImageReader::new(Cursor::new(&data));
        reader.set_format(format);
        reader
            .decode()
            .map_err(|e| FindrError::Contract(format!("image part does not decode as {media_type}: {e}")))?;
        Ok(Part::Image { data, media_type })
    }

    fn canonical(&self) -> Value {
        match self {
            Part::Text(t) => json!({"type": "text", "text": t}),
            Part::Image { data, media_type } => {
                json!({"type": "image", "media_type": media_type.as_str(), "sha256": sha256_hex(data)})
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn new(role: Role, parts: Vec<Part>) -> Result<Self> {
        if parts.is_empty() {
            return Err(FindrError::Contract("message has no parts".into()));
        }
        for p in &parts {
            if let Part::Text(t) = p {
                if t.trim().is_empty() {
                    return Err(FindrError::Contract("text part is empty".into()));
                }
            }
        }
        Ok(Message { role, parts })
    }

    pub fn user(parts: Vec<Part>) -> Result<Self> {
        Message::new(Role::User, parts)
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text(t) => Some(t.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    /// `None` leaves the provider's default in place (the field is omitted on the wire).
    pub temperature: Option<f64>,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, messages: Vec<Message>, temperature: Option<f64>) -> Result<Self> {
        if messages.is_empty() {
            return Err(FindrError::Contract("chat request needs at least one message".into()));
        }
        if let Some(t) = temperature {
            if !(t.is_finite() && t >= 0.0) {
                return Err(FindrError::Contract(format!("temperature {t} must be >= 0")));
            }
        }
        Ok(ChatRequest {
            model_id: model_id.into(),
            messages,
            temperature,
        })
    }

    /// The request with image payloads replaced by their SHA-256 digests.
    pub fn canonical(&self) -> Value {
        let messages: Vec<Value> = self
            .messages
            .iter()
            .map(|m| {
                json!({
                    "role": m.role,
                    "parts": m.parts.iter().map(Part::canonical).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "model_id": self.model_id,
            "messages": messages,
            "temperature": self.temperature,
        })
    }
}

/// SHA-256 (hex) of the canonical serialization of the request.
pub fn cache_key(req: &ChatRequest) -> String {
    canonical_key(&req.canonical())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub provider_meta: Map<String, Value>,
}

impl ChatResponse {
    pub fn new(text: impl Into<String>) -> Self {
        ChatResponse {
            text: text.into(),
            provider_meta: Map::new(),
        }
    }
}

/// A backend that answers chat requests. Implementations count every
/// attempt that would reach the network.
pub trait ChatProvider: Send + Sync {
    fn send(&self, req: &ChatRequest) -> std::result::Result<ChatResponse, AttemptError>;
    fn network_calls(&self) -> u64;
}
