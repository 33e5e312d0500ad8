use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Map, Value};

use super::{ChatProvider, ChatRequest, ChatResponse, Part};
use crate::error::{FindrError, Result};
use crate::http_util;
use crate::limits::AttemptError;

pub const API_KEY_ENV: &str = "FINDR_CHAT_API_KEY";

/// Client for `POST {base_url}/chat/completions` in the common
/// chat-completions JSON shape. Images travel as base64 data URLs.
pub struct HttpChatProvider {
    agent: ureq::Agent,
    url: String,
    api_key: String,
    options: Map<String, Value>,
    calls: AtomicU64,
}

impl HttpChatProvider {
    /// `options` are merged verbatim into every request body (provider-specific knobs).
    pub fn new(base_url: &str, api_key: impl Into<String>, options: Map<String, Value>, timeout: Duration) -> Self {
        HttpChatProvider {
            agent: http_util::agent(timeout),
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.into(),
            options,
            calls: AtomicU64::new(0),
        }
    }

    /// Reads the credential from `FINDR_CHAT_API_KEY`.
    pub fn from_env(base_url: &str, options: Map<String, Value>, timeout: Duration) -> Result<Self> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| FindrError::Config(format!("environment variable {API_KEY_ENV} is not set")))?;
        Ok(HttpChatProvider::new(base_url, key, options, timeout))
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn wire_body(&self, req: &ChatRequest) -> Value {
        let messages: Vec<Value> = req
            .messages
            .iter()
            .map(|m| {
                let content = match m.parts.as_slice() {
                    [Part::Text(t)] => Value::String(t.clone()),
                    parts => Value::Array(parts.iter().map(wire_part).collect()),
                };
                json!({"role": m.role, "content": content})
            })
            .collect();
        let mut body = Map::new();
        for (k, v) in &self.options {
            body.insert(k.clone(), v.clone());
        }
        body.insert("model".into(), Value::String(req.model_id.clone()));
        body.insert("messages".into(), Value::Array(messages));
        if let Some(t) = req.temperature {
            body.insert("temperature".into(), json!(t));
        }
        Value::Object(body)
    }
}

fn wire_part(p: &Part) -> Value {
    match p {
        Part::Text(t) => json!({"type": "text", "text": t}),
        Part::Image { data, media_type } => {
            let b64 = base64::engine::general_purpose::STANDARD.encode(data);
            json!({"type": "image_url", "image_url": {"url": format!("data:{media_type};base64,{b64}")}})
        }
    }
}

/// Extracts the assistant text from a chat-completions response body.
pub fn parse_completion(body: &Value) -> Result<ChatResponse> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| FindrError::ProviderContract("response has no choices[0].message.content".into()))?;
    let text = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p.get("text").and_then(|t| t.as_str()))
            .collect::<Vec<_>>()
            .concat(),
        Value::Null => String::new(),
        other => return Err(FindrError::ProviderContract(format!("unexpected content {other}"))),
    };
    let mut meta = Map::new();
    if let Some(usage) = body.get("usage") {
        meta.insert("usage".into(), usage.clone());
    }
    if let Some(reason) = body.pointer("/choices/0/finish_reason") {
        meta.insert("finish_reason".into(), reason.clone());
    }
    Ok(ChatResponse { text, provider_meta: meta })
}

impl ChatProvider for HttpChatProvider {
    fn send(&self, req: &ChatRequest) -> std::result::Result<ChatResponse, AttemptError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let body = self.wire_body(req);
        let value = http_util::post_json(&self.agent, &self.url, Some(&self.api_key), &body)?;
        let mut resp = parse_completion(&value).map_err(AttemptError::Fatal)?;
        resp.provider_meta.insert("status".into(), json!(200));
        Ok(resp)
    }

    fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
