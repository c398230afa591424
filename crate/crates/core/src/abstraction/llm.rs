//! Text completion back-ends and the OpenAI-compatible chat client.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const ENDPOINT_VAR: &str = "LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompletionError {
    #[error("authentication rejected ({status}): {body}")]
    Authentication { status: u16, body: String },
    #[error("rate limited; gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("server error {status}; gave up after {attempts} attempts")]
    Server { status: u16, attempts: u32 },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed response envelope: {0}")]
    MalformedResponse(String),
    #[error("no recorded response for prompt {fingerprint}")]
    ReplayMiss { fingerprint: String },
    #[error("configuration: {0}")]
    Config(String),
}

/// Anything that turns a prompt into response text.
pub trait Completer: Send + Sync {
    fn backend_id(&self) -> &str;

    fn complete(&self, prompt: &str) -> Result<String, CompletionError>;

    /// Requests issued so far.
    fn calls(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmParams {
    pub model: String,
    pub temperature: f32,
    pub max_tokens: u32,
    pub timeout_secs: u64,
}

impl Default for LlmParams {
    fn default() -> Self {
        LlmParams {
            model: "gpt-4-0613".into(),
            temperature: 0.0,
            max_tokens: 512,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 20_000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(retry as i32);
        Duration::from_millis(ms.min(self.max_backoff_ms as f64) as u64)
    }
}

enum Attempt {
    Done(String),
    Retry(CompletionError),
    Fail(CompletionError),
}

/// Blocking client for `/chat/completions`. One user message per request.
pub struct ChatClient {
    http: Client,
    url: String,
    api_key: String,
    params: LlmParams,
    retry: RetryPolicy,
    requests: AtomicU64,
    retries: AtomicU64,
}

impl ChatClient {
    pub fn new(
        endpoint: &str,
        api_key: impl Into<String>,
        params: LlmParams,
        retry: RetryPolicy,
    ) -> Result<Self, CompletionError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(params.timeout_secs))
            .build()
            .map_err(|e| CompletionError::Config(e.to_string()))?;
        Ok(ChatClient {
            http,
            url: chat_url(endpoint),
            api_key: api_key.into(),
            params,
            retry,
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
        })
    }

    /// Reads `LLM_ENDPOINT` and `LLM_API_KEY`.
    pub fn from_env(params: LlmParams, retry: RetryPolicy) -> Result<Self, CompletionError> {
        let endpoint =
            std::env::var(ENDPOINT_VAR).map_err(|_| CompletionError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let key =
            std::env::var(API_KEY_VAR).map_err(|_| CompletionError::Config(format!("{API_KEY_VAR} is not set")))?;
        Self::new(&endpoint, key, params, retry)
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn attempt(&self, body: &serde_json::Value) -> Attempt {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let resp = match self.http.post(&self.url).bearer_auth(&self.api_key).json(body).send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(CompletionError::Transport {
                    attempts: 0,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry(CompletionError::Transport {
                    attempts: 0,
                    message: e.to_string(),
                })
            }
        };
        match status {
            s if s.is_success() => match first_choice_content(&text) {
                Ok(content) => Attempt::Done(content),
                Err(e) => Attempt::Fail(e),
            },
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Attempt::Fail(CompletionError::Authentication {
                status: status.as_u16(),
                body: text,
            }),
            StatusCode::TOO_MANY_REQUESTS => Attempt::Retry(CompletionError::RateLimited { attempts: 0 }),
            s if s.is_server_error() => Attempt::Retry(CompletionError::Server {
                status: s.as_u16(),
                attempts: 0,
            }),
            s => Attempt::Fail(CompletionError::Rejected {
                status: s.as_u16(),
                body: text,
            }),
        }
    }
}

impl Completer for ChatClient {
    fn backend_id(&self) -> &str {
        "llm"
    }

    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let body = json!({
            "model": self.params.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.params.temperature,
            "max_tokens": self.params.max_tokens,
        });
        let mut retry = 0;
        loop {
            match self.attempt(&body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if retry >= self.retry.max_retries => {
                    return Err(with_attempts(e, retry + 1));
                }
                Attempt::Retry(_) => {
                    std::thread::sleep(self.retry.backoff(retry));
                    retry += 1;
                    self.retries.fetch_add(1, Ordering::Relaxed);
                }
            }
        }
    }

    fn calls(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}

fn with_attempts(e: CompletionError, attempts: u32) -> CompletionError {
    match e {
        CompletionError::RateLimited { .. } => CompletionError::RateLimited { attempts },
        CompletionError::Server { status, .. } => CompletionError::Server { status, attempts },
        CompletionError::Transport { message, .. } => CompletionError::Transport { attempts, message },
        other => other,
    }
}

fn chat_url(endpoint: &str) -> String {
    let base = endpoint.trim().trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else {
        format!("{base}/chat/completions")
    }
}

#[derive(Deserialize)]
struct Envelope {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

/// Content of the first choice in a chat-completions response body.
pub fn first_choice_content(body: &str) -> Result<String, CompletionError> {
    let env: Envelope = serde_json::from_str(body).map_err(|e| CompletionError::MalformedResponse(e.to_string()))?;
    env.choices
        .into_iter()
        .next()
        .ok_or_else(|| CompletionError::MalformedResponse("no choices".into()))?
        .message
        .content
        .ok_or_else(|| CompletionError::MalformedResponse("first choice has no content".into()))
}
