use std::time::Duration;

use serde_json::Value;

use crate::error::FindrError;
use crate::limits::AttemptError;

pub(crate) fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn transport_error(e: ureq::Error) -> AttemptError {
    match e {
        ureq::Error::BadUri(u) => AttemptError::Fatal(FindrError::Config(format!("bad URL: {u}"))),
        other => AttemptError::Retryable(other.to_string()),
    }
}

/// Maps a status code and body to success or a retry decision:
/// 429 and 5xx retry, any other non-2xx is fatal and carries the body.
fn check_status(status: u16, body: String) -> Result<String, AttemptError> {
    match status {
        200..=299 => Ok(body),
        429 | 500..=599 => Err(AttemptError::Retryable(format!("HTTP {status}: {body}"))),
        _ => Err(AttemptError::Fatal(FindrError::Request { status, body })),
    }
}

pub(crate) fn post_json(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &Value,
) -> Result<Value, AttemptError> {
    let mut req = agent.post(url).header("Content-Type", "application/json");
    if let Some(token) = bearer {
        req = req.header("Authorization", format!("Bearer {token}"));
    }
    let mut resp = req.send(body.to_string()).map_err(transport_error)?;
    let status = resp.status().as_u16();
    let text = resp
        .body_mut()
        .with_config()
        .limit(256 * 1024 * 1024)
        .read_to_string()
        .map_err(transport_error)?;
    let text = check_status(status, text)?;
    serde_json::from_str(&text).map_err(|e| {
        AttemptError::Fatal(FindrError::ProviderContract(format!("response from {url} is not JSON: {e}")))
    })
}

pub(crate) fn get_json(agent: &ureq::Agent, url: &str) -> Result<Value, AttemptError> {
    let mut resp = agent.get(url).call().map_err(transport_error)?;
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string().map_err(transport_error)?;
    let text = check_status(status, text)?;
    serde_json::from_str(&text).map_err(|e| {
        AttemptError::Fatal(FindrError::ProviderContract(format!("response from {url} is not JSON: {e}")))
    })
}
