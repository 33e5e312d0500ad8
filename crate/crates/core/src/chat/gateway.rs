use std::sync::Arc;

use serde_json::json;

use super::{cache_key, ChatProvider, ChatRequest, ChatResponse};
use crate::error::{FindrError, Result};
use crate::limits::{with_retries, Limiter, RetryPolicy};
use crate::store::ContentStore;

/// Shared front door to a chat provider: content-addressed response cache,
/// retries with exponential backoff, in-flight cap and rate limit.
pub struct ChatGateway {
    provider: Arc<dyn ChatProvider>,
    cache: Option<ContentStore>,
    policy: RetryPolicy,
    limiter: Limiter,
}

impl ChatGateway {
    pub fn new(provider: Arc<dyn ChatProvider>, cache: Option<ContentStore>, policy: RetryPolicy, limiter: Limiter) -> Self {
        ChatGateway {
            provider,
            cache,
            policy,
            limiter,
        }
    }

    pub fn network_calls(&self) -> u64 {
        self.provider.network_calls()
    }

    pub fn max_in_flight(&self) -> usize {
        self.limiter.max_in_flight()
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse> {
        self.complete_with(req, &self.policy)
    }

    pub fn complete_with(&self, req: &ChatRequest, policy: &RetryPolicy) -> Result<ChatResponse> {
        let key = cache_key(req);
        if let Some(cache) = &self.cache {
            if let Some(entry) = cache.get(&key)? {
                let resp = entry
                    .get("response")
                    .cloned()
                    .ok_or_else(|| FindrError::Parse(format!("cache entry {key} has no response")))?;
                return Ok(serde_json::from_value(resp)?);
            }
        }
        let resp = self.fetch(req, policy)?;
        if let Some(cache) = &self.cache {
            cache.put(&key, &json!({"request": req.canonical(), "response": resp}))?;
        }
        Ok(resp)
    }

    /// Drops any cached response and asks the provider again; used when a
    /// cached answer turned out to be unparseable.
    pub fn refresh(&self, req: &ChatRequest) -> Result<ChatResponse> {
        if let Some(cache) = &self.cache {
            cache.remove(&cache_key(req))?;
        }
        self.complete(req)
    }

    fn fetch(&self, req: &ChatRequest, policy: &RetryPolicy) -> Result<ChatResponse> {
        with_retries(policy, || {
            let _permit = self.limiter.acquire();
            self.provider.send(req)
        })
    }
}
