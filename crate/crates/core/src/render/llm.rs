//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Anything that turns a chat transcript into one completion.
pub trait ChatBackend: Send + Sync {
    /// Stable identifier (provider and model); part of every cache key.
    fn id(&self) -> String;
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API token.
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    config: ChatConfig,
    http: JsonClient,
}

impl ChatClient {
    pub fn new(config: ChatConfig) -> Self {
        let http = JsonClient::new(
            Duration::from_secs(config.timeout_secs),
            config.token_env.as_deref(),
            config.retry,
        );
        ChatClient { config, http }
    }
}

impl ChatBackend for ChatClient {
    fn id(&self) -> String {
        format!("chat:{}", self.config.model)
    }

    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": temperature,
        });
        let reply = self.http.post(&url, &body)?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::MalformedResponse("no choices[0].message.content".into()))?;
        if content.trim().is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(content.to_string())
    }
}
