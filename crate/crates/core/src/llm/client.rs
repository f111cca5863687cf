use std::time::Duration;

use async_trait::async_trait;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

pub const BASE_URL_ENV: &str = "RL_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "RL_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }
}

/// Body of an OpenAI-style chat-completions call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    /// Network failures, rate limiting and server errors.
    #[error("transport (retryable): {0}")]
    Retryable(String),
    #[error("transport: {0}")]
    Fatal(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Retryable(_))
    }
}

/// Anything that can turn a chat request into completion text.
#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("temperature must be within [0, 2], got {0}")]
    Temperature(f64),
    #[error("max_attempts must be at least 1")]
    Attempts,
    #[error("concurrency must be at least 1")]
    Concurrency,
    #[error("model name is empty")]
    Model,
    #[error("no endpoint configured; pass --base-url or set {BASE_URL_ENV}")]
    MissingBaseUrl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the initial backoff.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.saturating_sub(1));
        self.initial_backoff.saturating_mul(factor).min(self.max_backoff)
    }
}

/// Generation settings for one labeling run.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptConfig {
    pub model: String,
    /// `None` leaves the endpoint default in place.
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub retry: RetryPolicy,
    pub concurrency: usize,
}

impl PromptConfig {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: None,
            max_tokens: Some(512),
            retry: RetryPolicy::default(),
            concurrency: 4,
        }
    }

    /// The low-temperature configuration, 0.1.
    pub fn low_temperature(model: impl Into<String>) -> Self {
        Self {
            temperature: Some(0.1),
            ..Self::new(model)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return Err(ConfigError::Temperature(t));
            }
        }
        if self.retry.max_attempts == 0 {
            return Err(ConfigError::Attempts);
        }
        if self.concurrency == 0 {
            return Err(ConfigError::Concurrency);
        }
        if self.model.trim().is_empty() {
            return Err(ConfigError::Model);
        }
        Ok(())
    }
}

/// Chat-completions client for any OpenAI-compatible endpoint.
#[derive(Debug, Clone)]
pub struct HttpChatBackend {
    client: reqwest::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Result<Self, TransportError> {
        let base = base_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(Self { client, url, api_key })
    }

    /// Reads the endpoint and key from the environment, with an optional
    /// explicit base URL taking precedence.
    pub fn from_env(base_url: Option<&str>, timeout: Duration) -> Result<Self, ConfigError> {
        let base = match base_url {
            Some(b) => b.to_string(),
            None => std::env::var(BASE_URL_ENV).map_err(|_| ConfigError::MissingBaseUrl)?,
        };
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(&base, key, timeout).map_err(|_| ConfigError::MissingBaseUrl)
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

#[async_trait]
impl ChatBackend for HttpChatBackend {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut call = self.client.post(&self.url).json(request);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .await
            .map_err(|e| TransportError::Retryable(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(TransportError::Fatal(format!("HTTP {status}")));
        }
        let body: Value = response
            .json()
            .await
            .map_err(|e| TransportError::Retryable(format!("unreadable body: {e}")))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))
    }
}
