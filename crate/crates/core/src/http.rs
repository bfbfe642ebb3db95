//! Blocking JSON-over-HTTP with bounded exponential backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ureq::Agent;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self
            .base_delay_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: Agent,
    token: Option<String>,
    retry: RetryPolicy,
}

impl JsonClient {
    /// `token_env` names an environment variable holding a bearer token.
    pub fn new(timeout: Duration, token_env: Option<&str>, retry: RetryPolicy) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let token = token_env.and_then(|v| std::env::var(v).ok()).filter(|t| !t.is_empty());
        JsonClient {
            agent,
            token,
            retry,
        }
    }

    /// POSTs `body` and decodes a JSON reply. Connection failures, 429 and
    /// 5xx responses are retried; other statuses fail immediately.
    pub fn post(&self, url: &str, body: &Value) -> Result<Value> {
        let mut last = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            let mut req = self.agent.post(url).header("Content-Type", "application/json");
            if let Some(t) = &self.token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| Error::MalformedResponse(e.to_string()))?;
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status} from {url}");
                        log::warn!("{last}, attempt {}", attempt + 1);
                        continue;
                    }
                    if !(200..300).contains(&status) {
                        return Err(Error::MalformedResponse(format!(
                            "HTTP {status} from {url}: {}",
                            text.chars().take(200).collect::<String>()
                        )));
                    }
                    return serde_json::from_str(&text)
                        .map_err(|e| Error::MalformedResponse(format!("{url}: {e}")));
                }
                Err(e) => {
                    last = format!("{url}: {e}");
                    log::warn!("request failed ({last}), attempt {}", attempt + 1);
                }
            }
        }
        Err(Error::EndpointUnreachable(last))
    }
}
