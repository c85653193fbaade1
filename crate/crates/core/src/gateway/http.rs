use std::time::Duration;

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { attempts: 1, base_delay: Duration::ZERO }
    }

    /// Runs `op`, retrying transport failures with exponential backoff.
    pub fn run<T>(&self, mut op: impl FnMut() -> Result<T>) -> Result<T> {
        let mut attempt = 0;
        loop {
            match op() {
                Err(e) if e.is_retryable() && attempt + 1 < self.attempts => {
                    let delay = self.base_delay * 2u32.pow(attempt);
                    tracing::warn!(error = %e, ?delay, "retrying provider call");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

pub(crate) fn client(timeout: Duration) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| Error::Transport(e.to_string()))
}

/// POSTs JSON and decodes a JSON reply. 429 maps to `RateLimited`, 5xx and
/// connection failures to `Transport`, other non-success codes to `Protocol`.
pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    bearer: Option<&str>,
    body: &Value,
) -> Result<Value> {
    let mut req = client.post(url).json(body);
    if let Some(key) = bearer {
        req = req.bearer_auth(key);
    }
    let resp = req.send().map_err(|e| Error::Transport(format!("{url}: {e}")))?;
    let status = resp.status();
    let text = resp.text().map_err(|e| Error::Transport(format!("{url}: {e}")))?;
    if status.as_u16() == 429 {
        return Err(Error::RateLimited(url.to_string()));
    }
    if status.is_server_error() {
        return Err(Error::Transport(format!("{url}: HTTP {status}: {}", error_message(&text))));
    }
    if !status.is_success() {
        return Err(Error::Protocol(format!("{url}: HTTP {status}: {}", error_message(&text))));
    }
    serde_json::from_str(&text).map_err(|e| Error::Protocol(format!("{url}: malformed JSON reply: {e}")))
}

fn error_message(body: &str) -> String {
    serde_json::from_str::<Value>(body)
        .ok()
        .and_then(|v| match &v["error"] {
            Value::String(s) => Some(s.clone()),
            Value::Object(o) => o.get("message").and_then(|m| m.as_str()).map(String::from),
            _ => None,
        })
        .unwrap_or_else(|| body.chars().take(200).collect())
}
