use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{cache_key, ChatProvider, ChatRequest, ChatResponse};
use crate::error::{FindrError, Result};
use crate::limits::AttemptError;

/// Replays canned responses keyed by [`cache_key`]. A total function of the
/// key: the same request always yields the same text.
#[derive(Debug, Default)]
pub struct MockChatProvider {
    responses: HashMap<String, String>,
    calls: AtomicU64,
}

/// On-disk form of a recorded session.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MockSession {
    pub responses: BTreeMap<String, String>,
}

impl MockChatProvider {
    pub fn new(responses: HashMap<String, String>) -> Self {
        MockChatProvider {
            responses,
            calls: AtomicU64::new(0),
        }
    }

    pub fn from_session_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| FindrError::io(path, e))?;
        let session: MockSession = serde_json::from_slice(&bytes)
            .map_err(|e| FindrError::Config(format!("bad mock session {}: {e}", path.display())))?;
        Ok(MockChatProvider::new(session.responses.into_iter().collect()))
    }

    /// Builds a replay provider from a chat cache directory written by
    /// [`super::ChatGateway`].
    pub fn from_cache_dir(dir: &Path) -> Result<Self> {
        let mut responses = HashMap::new();
        let shards = match fs::read_dir(dir) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(MockChatProvider::default()),
            Err(e) => return Err(FindrError::io(dir, e)),
        };
        for shard in shards {
            let shard = shard.map_err(|e| FindrError::io(dir, e))?.path();
            if !shard.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&shard).map_err(|e| FindrError::io(&shard, e))? {
                let path = entry.map_err(|e| FindrError::io(&shard, e))?.path();
                let Some(key) = path.file_stem().and_then(|s| s.to_str()) else { continue };
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let bytes = fs::read(&path).map_err(|e| FindrError::io(&path, e))?;
                let v: serde_json::Value = serde_json::from_slice(&bytes)?;
                if let Some(text) = v.pointer("/response/text").and_then(|t| t.as_str()) {
                    responses.insert(key.to_string(), text.to_string());
                }
            }
        }
        Ok(MockChatProvider::new(responses))
    }

    pub fn insert(&mut self, req: &ChatRequest, text: impl Into<String>) {
        self.responses.insert(cache_key(req), text.into());
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatProvider for MockChatProvider {
    fn send(&self, req: &ChatRequest) -> std::result::Result<ChatResponse, AttemptError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = cache_key(req);
        match self.responses.get(&key) {
            Some(text) => {
                let mut resp = ChatResponse::new(text.clone());
                resp.provider_meta.insert("provider".into(), "mock".into());
                Ok(resp)
            }
            None => Err(AttemptError::Fatal(FindrError::Transport(format!(
                "mock session has no response for request {key}"
            )))),
        }
    }

    fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
