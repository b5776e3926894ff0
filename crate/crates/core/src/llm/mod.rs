// SPDX-License-Identifier: Apache-2.0
//! Chat-completion gateway over live, replayed, and scripted backends.

mod backends;
mod extract;

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::model::sha256_hex;

pub use backends::{LiveBackend, RecordingBackend, ReplayBackend, ScriptedBackend, TranscriptEntry, API_KEY_ENV};
pub use extract::{extract_code_block, CodeTag, ExtractError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sample slot this request belongs to. Part of the replay key so that
    /// independent samples of one prompt can be recorded separately; never
    /// sent over the wire.
    #[serde(default)]
    pub variant: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| GatewayError::InvalidRequest("messages must be nonempty".into()))?;
        if first.role == Role::Assistant {
            return Err(GatewayError::InvalidRequest(
                "first message must come from system or user".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Replay key: model, messages, and sample slot. Sampling parameters are
    /// left out so transcripts survive decoding tweaks.
    pub fn digest(&self) -> String {
        let key = serde_json::json!({
            "model": self.model,
            "messages": self.messages,
            "variant": self.variant,
        });
        sha256_hex(key.to_string().as_bytes())
    }

    pub fn with_variant(mut self, variant: u32) -> Self {
        self.variant = variant;
        self
    }
}

/// Decoding parameters applied to every request of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            model: "gpt-4".into(),
            temperature: 0.8,
            max_tokens: 4096,
            seed: None,
        }
    }
}

impl ModelParams {
    pub fn request(&self, system: &str, user: String) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            seed: self.seed,
            variant: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: Usage,
}

impl ChatResponse {
    pub fn stop(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.content.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("request rejected (HTTP {status}): {body}")]
    Protocol { status: u16, body: String },
    #[error("server error (HTTP {status})")]
    Server { status: u16 },
    #[error("transport timeout")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no transcript entry for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("response truncated at max_tokens (request {digest})")]
    Truncated { digest: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("scripted backend: {0}")]
    Script(String),
    #[error("transcript I/O: {0}")]
    Transcript(String),
}

impl GatewayError {
    /// Whether another attempt could succeed.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            GatewayError::RateLimited { .. }
                | GatewayError::Server { .. }
                | GatewayError::Timeout
                | GatewayError::Transport(_)
        )
    }
}

/// Something that answers chat requests.
pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_retries: u32) -> Self {
        Self {
            max_retries,
            initial_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        let ms = self
            .initial_delay_ms
            .saturating_mul(1u64 << retry.min(20))
            .min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

/// A successful call plus the transient failures it absorbed.
#[derive(Debug, Clone)]
pub struct Completion {
    pub response: ChatResponse,
    pub retries: Vec<GatewayError>,
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Shareable handle: retries, backoff, and an in-flight bound over a backend.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    slots: Arc<Slots>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, retry: RetryPolicy, max_in_flight: usize) -> Self {
        Self {
            backend,
            retry,
            slots: Arc::new(Slots {
                free: Mutex::new(max_in_flight.max(1)),
                cv: Condvar::new(),
            }),
        }
    }

    pub fn backend(&self) -> &Arc<dyn ChatBackend> {
        &self.backend
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<Completion, GatewayError> {
        request.validate()?;
        let _slot = self.slots.acquire();
        let mut retries = Vec::new();
        loop {
            match self.backend.send(request) {
                Ok(resp) => {
                    return match resp.finish_reason {
                        FinishReason::Stop => Ok(Completion {
                            response: resp,
                            retries,
                        }),
                        FinishReason::Length => Err(GatewayError::Truncated {
                            digest: request.digest(),
                        }),
                        FinishReason::Error => Err(GatewayError::BadResponse(
                            "backend reported finish_reason=error".into(),
                        )),
                    };
                }
                Err(e) if e.is_transient() && (retries.len() as u32) < self.retry.max_retries => {
                    let delay = self.retry.delay(retries.len() as u32);
                    warn!(error = %e, ?delay, "transient gateway failure, retrying");
                    retries.push(e);
                    thread::sleep(delay);
                }
                Err(GatewayError::RateLimited { .. }) => {
                    return Err(GatewayError::RateLimited {
                        attempts: retries.len() as u32 + 1,
                    })
                }
                Err(e) => {
                    debug!(error = %e, "gateway call failed");
                    return Err(e);
                }
            }
        }
    }
}
