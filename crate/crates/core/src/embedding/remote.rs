//! HTTP client for the embedding service wire protocol.

use std::io::Cursor;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{EmbeddingBackend, ImageInput, ProviderInfo};
use crate::error::{FindrError, Result};
use crate::http_util;
use crate::limits::{with_retries, AttemptError, RetryPolicy};

pub const DEFAULT_INPUT_SIZE: u32 = 224;

pub struct RemoteProvider {
    agent: ureq::Agent,
    base: String,
    info: ProviderInfo,
    input_size: u32,
    calls: AtomicU64,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
    dim: usize,
}

fn contract(msg: String) -> AttemptError {
    AttemptError::Fatal(FindrError::ProviderContract(msg))
}

impl RemoteProvider {
    /// Fetches `/v1/info` (with retries) and returns a client bound to it.
    pub fn connect(base_url: &str, timeout: Duration, policy: &RetryPolicy) -> Result<Self> {
        let agent = http_util::agent(timeout);
        let base = base_url.trim_end_matches('/').to_string();
        let calls = AtomicU64::new(0);
        let value = with_retries(policy, || {
            calls.fetch_add(1, Ordering::SeqCst);
            http_util::get_json(&agent, &format!("{base}/v1/info"))
        })?;
        let info: ProviderInfo = serde_json::from_value(value)
            .map_err(|e| FindrError::ProviderContract(format!("malformed /v1/info response: {e}")))?;
        if info.dim == 0 {
            return Err(FindrError::ProviderContract("/v1/info reports dim 0".into()));
        }
        Ok(RemoteProvider {
            agent,
            base,
            info,
            input_size: DEFAULT_INPUT_SIZE,
            calls,
        })
    }

    pub fn with_input_size(mut self, side: u32) -> Self {
        self.input_size = side;
        self
    }

    fn post(&self, path: &str, body: &Value, expected: usize) -> std::result::Result<Vec<Vec<f32>>, AttemptError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let url = format!("{}{path}", self.base);
        let value = http_util::post_json(&self.agent, &url, None, body)?;
        let resp: EmbedResponse =
            serde_json::from_value(value).map_err(|e| contract(format!("malformed response from {url}: {e}")))?;
        if resp.dim != self.info.dim {
            return Err(contract(format!("{url} returned dim {}, provider info says {}", resp.dim, self.info.dim)));
        }
        if resp.embeddings.len() != expected {
            return Err(contract(format!(
                "{url} returned {} embeddings for {expected} inputs",
                resp.embeddings.len()
            )));
        }
        if let Some(bad) = resp.embeddings.iter().find(|e| e.len() != self.info.dim) {
            return Err(contract(format!(
                "{url} returned a {}-component embedding, provider info says {}",
                bad.len(),
                self.info.dim
            )));
        }
        Ok(resp.embeddings)
    }
}

fn png_base64(input: &ImageInput) -> std::result::Result<String, AttemptError> {
    let mut buf = Cursor::new(Vec::new());
    input
        .pixels
        .write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| AttemptError::Fatal(FindrError::Contract(format!("cannot encode image: {e}"))))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(buf.into_inner()))
}

impl EmbeddingBackend for RemoteProvider {
    fn info(&self) -> &ProviderInfo {
        &self.info
    }

    fn input_size(&self) -> u32 {
        self.input_size
    }

    fn embed_texts(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f32>>, AttemptError> {
        self.post("/v1/embed/text", &json!({ "texts": texts }), texts.len())
    }

    fn embed_images(&self, images: &[ImageInput]) -> std::result::Result<Vec<Vec<f32>>, AttemptError> {
        let encoded = images.iter().map(png_base64).collect::<std::result::Result<Vec<_>, _>>()?;
        let body = json!({ "images_b64": encoded, "media_type": "image/png" });
        self.post("/v1/embed/image", &body, images.len())
    }

    fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
