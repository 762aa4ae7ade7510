//! Chat-completions client with retry/backoff and record/replay transports.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const DEFAULT_API_KEY_ENV: &str = "PREFIXLLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: f64,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        LlmEndpointConfig {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "o1-mini".to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            temperature: 1.0,
            max_retries: 3,
            timeout_secs: 120.0,
            backoff_ms: 500,
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(LlmError::Config(format!(
                "timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        if self.base_url.trim().is_empty() {
            return Err(LlmError::Config("base_url is empty".into()));
        }
        Ok(())
    }

    pub fn endpoint_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn single_user_turn(cfg: &LlmEndpointConfig, prompt: &str) -> Self {
        ChatRequest {
            model: cfg.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.into(),
            }],
            temperature: cfg.temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("replay cassette exhausted after {0} exchange(s)")]
    CassetteExhausted(usize),
    #[error("replayed request #{index} differs from the recorded one")]
    ReplayMismatch { index: usize },
}

impl TransportError {
    fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Timeout | TransportError::Connection(_))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
    #[error("endpoint rejected the credentials (HTTP {0})")]
    Auth(u16),
    #[error("gave up after {attempts} attempt(s): {last}")]
    TimeoutAfterRetries { attempts: u32, last: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed endpoint reply: {0}")]
    MalformedReply(String),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Transport(TransportError),
}

/// Moves one JSON request to the endpoint and back.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        api_key: &str,
        request: &ChatRequest,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn post(
        &self,
        url: &str,
        api_key: &str,
        request: &ChatRequest,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let resp = self
            .client
            .post(url)
            .bearer_auth(api_key)
            .timeout(timeout)
            .json(request)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout
                } else {
                    TransportError::Connection(e.to_string())
                }
            })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Connection(e.to_string())
            }
        })?;
        Ok(HttpReply { status, body })
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    /// Recorded request; replay checks it when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<ChatRequest>,
    pub status: u16,
    pub body: String,
}

impl Exchange {
    /// A 200 reply whose assistant message is `content`.
    pub fn assistant(content: &str) -> Self {
        let body = serde_json::json!({
            "object": "chat.completion",
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }]
        });
        Exchange {
            request: None,
            status: 200,
            body: body.to_string(),
        }
    }
}

/// Fixture file: an ordered list of exchanges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub exchanges: Vec<Exchange>,
}

impl Cassette {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("cassette serializes");
        fs::write(path, text + "\n")
    }
}

/// Serves recorded exchanges in order without touching the network.
pub struct ReplayTransport {
    queue: Mutex<VecDeque<Exchange>>,
    served: Mutex<usize>,
}

impl ReplayTransport {
    pub fn new(cassette: Cassette) -> Self {
        ReplayTransport {
            queue: Mutex::new(cassette.exchanges.into()),
            served: Mutex::new(0),
        }
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("replay lock").len()
    }
}

impl Transport for ReplayTransport {
    fn post(
        &self,
        _url: &str,
        _api_key: &str,
        request: &ChatRequest,
        _timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let mut served = self.served.lock().expect("replay lock");
        let next = self.queue.lock().expect("replay lock").pop_front();
        let exchange = next.ok_or(TransportError::CassetteExhausted(*served))?;
        let index = *served;
        *served += 1;
        if let Some(recorded) = &exchange.request {
            if recorded.messages != request.messages || recorded.model != request.model {
                return Err(TransportError::ReplayMismatch { index });
            }
        }
        Ok(HttpReply {
            status: exchange.status,
            body: exchange.body,
        })
    }
}

/// Passes requests through and keeps every exchange for saving as a cassette.
pub struct RecordingTransport<T: Transport> {
    inner: T,
    path: PathBuf,
    recorded: Mutex<Cassette>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T, path: impl Into<PathBuf>) -> Self {
        RecordingTransport {
            inner,
            path: path.into(),
            recorded: Mutex::new(Cassette::default()),
        }
    }

    pub fn save(&self) -> std::io::Result<()> {
        self.recorded.lock().expect("recording lock").save(&self.path)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn post(
        &self,
        url: &str,
        api_key: &str,
        request: &ChatRequest,
        timeout: Duration,
    ) -> Result<HttpReply, TransportError> {
        let reply = self.inner.post(url, api_key, request, timeout)?;
        self.recorded
            .lock()
            .expect("recording lock")
            .exchanges
            .push(Exchange {
                request: Some(request.clone()),
                status: reply.status,
                body: reply.body.clone(),
            });
        Ok(reply)
    }
}

/// Endpoint client; cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct LlmClient {
    cfg: LlmEndpointConfig,
    api_key: String,
    transport: Arc<dyn Transport>,
}

impl LlmClient {
    pub fn new(cfg: LlmEndpointConfig, api_key: impl Into<String>, transport: Arc<dyn Transport>) -> Result<Self, LlmError> {
        cfg.validate()?;
        Ok(LlmClient {
            cfg,
            api_key: api_key.into(),
            transport,
        })
    }

    /// HTTP client with the key read from `cfg.api_key_env`.
    pub fn from_env(cfg: LlmEndpointConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| LlmError::MissingApiKey(cfg.api_key_env.clone()))?;
        LlmClient::new(cfg, key, Arc::new(HttpTransport::new()?))
    }

    /// Client that replays a cassette; no key or network needed.
    pub fn replay(cfg: LlmEndpointConfig, cassette: Cassette) -> Result<Self, LlmError> {
        LlmClient::new(cfg, "replay", Arc::new(ReplayTransport::new(cassette)))
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.cfg
    }

    /// Sends `prompt` as a single user turn and returns the assistant text.
    /// Transport failures, 429 and 5xx replies are retried with exponential
    /// backoff, at most `max_retries` times.
    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let request = ChatRequest::single_user_turn(&self.cfg, prompt);
        let url = self.cfg.endpoint_url();
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            match self.transport.post(&url, &self.api_key, &request, self.cfg.timeout()) {
                Err(e) if e.is_retryable() => {
                    log::warn!("attempt {} of {attempts} failed: {e}", attempt + 1);
                    last = e.to_string();
                }
                Err(e) => return Err(LlmError::Transport(e)),
                Ok(reply) => match reply.status {
                    200..=299 => return parse_completion(&reply.body),
                    401 | 403 => return Err(LlmError::Auth(reply.status)),
                    429 | 500..=599 => {
                        log::warn!("attempt {} of {attempts}: HTTP {}", attempt + 1, reply.status);
                        last = format!("HTTP {}", reply.status);
                    }
                    status => {
                        return Err(LlmError::Http {
                            status,
                            body: reply.body,
                        })
                    }
                },
            }
        }
        Err(LlmError::TimeoutAfterRetries { attempts, last })
    }
}

fn parse_completion(body: &str) -> Result<String, LlmError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| LlmError::MalformedReply(e.to_string()))?;
    let message = value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .ok_or_else(|| LlmError::MalformedReply("no choices[0].message".into()))?;
    match message.get("content") {
        None | Some(serde_json::Value::Null) => Ok(String::new()),
        Some(serde_json::Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(LlmError::MalformedReply(format!(
            "content is not a string: {other}"
        ))),
    }
}

/// One-shot call against the configured HTTP endpoint.
pub fn llm_propose(cfg: &LlmEndpointConfig, prompt: &str) -> Result<String, LlmError> {
    LlmClient::from_env(cfg.clone())?.complete(prompt)
}
