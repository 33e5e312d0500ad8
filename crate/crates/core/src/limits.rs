//! Retry policy, in-flight cap and token-bucket rate limiting shared by
//! the chat and embedding gateways.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::FindrError;

/// Exponential backoff: attempt `n` (0-based) waits `base * factor^n` before retrying.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
    pub timeout_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 1000,
            factor: 2.0,
            timeout_ms: 120_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay_before_retry(&self, failed_attempt: u32) -> Duration {
        let ms = self.base_delay_ms as f64 * self.factor.powi(failed_attempt as i32);
        Duration::from_millis(ms.min(u64::MAX as f64 / 2.0) as u64)
    }
}

/// Outcome of a single attempt against a remote service.
#[derive(Debug)]
pub enum AttemptError {
    /// 429, 5xx, timeouts and connection failures.
    Retryable(String),
    Fatal(FindrError),
}

/// Runs `op` until it succeeds, fails fatally, or the attempt budget is spent.
pub fn with_retries<T>(
    policy: &RetryPolicy,
    mut op: impl FnMut() -> Result<T, AttemptError>,
) -> Result<T, FindrError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        match op() {
            Ok(v) => return Ok(v),
            Err(AttemptError::Fatal(e)) => return Err(e),
            Err(AttemptError::Retryable(msg)) => {
                log::warn!("attempt {}/{} failed: {msg}", attempt + 1, attempts);
                last = msg;
                if attempt + 1 < attempts {
                    thread::sleep(policy.delay_before_retry(attempt));
                }
            }
        }
    }
    Err(FindrError::Transport(format!(
        "gave up after {attempts} attempt(s): {last}"
    )))
}

/// Caps concurrent in-flight requests and optionally rate-limits them.
#[derive(Debug)]
pub struct Limiter {
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    bucket: Option<Mutex<Bucket>>,
    rate_per_sec: f64,
    burst: f64,
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    last: Instant,
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    /// `rate_per_sec = None` disables the token bucket.
    pub fn new(max_in_flight: usize, rate_per_sec: Option<f64>) -> Self {
        let burst = rate_per_sec.map(|r| r.max(1.0)).unwrap_or(0.0);
        Limiter {
            max_in_flight: max_in_flight.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            bucket: rate_per_sec.filter(|r| *r > 0.0).map(|_| {
                Mutex::new(Bucket {
                    tokens: burst,
                    last: Instant::now(),
                })
            }),
            rate_per_sec: rate_per_sec.unwrap_or(0.0),
            burst,
        }
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn acquire(&self) -> Permit<'_> {
        {
            let mut n = self.in_flight.lock().unwrap();
            while *n >= self.max_in_flight {
                n = self.freed.wait(n).unwrap();
            }
            *n += 1;
        }
        if let Some(bucket) = &self.bucket {
            loop {
                let wait = {
                    let mut b = bucket.lock().unwrap();
                    let now = Instant::now();
                    let elapsed = now.duration_since(b.last).as_secs_f64();
                    b.tokens = (b.tokens + elapsed * self.rate_per_sec).min(self.burst);
                    b.last = now;
                    if b.tokens >= 1.0 {
                        b.tokens -= 1.0;
                        None
                    } else {
                        Some((1.0 - b.tokens) / self.rate_per_sec)
                    }
                };
                match wait {
                    None => break,
                    Some(secs) => thread::sleep(Duration::from_secs_f64(secs)),
                }
            }
        }
        Permit { limiter: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.in_flight.lock().unwrap();
        *n -= 1;
        self.limiter.freed.notify_one();
    }
}
