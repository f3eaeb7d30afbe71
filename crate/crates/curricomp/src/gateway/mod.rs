//! Model dispatch: backends, retries, bounded parallelism, and the response
//! cache.
//!
//! `complete` checks the content-addressed cache first and persists every
//! fresh response before returning it, so an interrupted run resumes from
//! where it stopped and re-analysis never re-queries a backend.

mod cache;
mod http;
mod mock;
mod parse;

pub use cache::ResponseCache;
pub use http::{HttpBackend, API_KEY_ENV};
pub use mock::{mock_complete, MockBackend};
pub use parse::{normalize, parse_extraction_answers, parse_scores, FailureKind, ParsedScores};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptBundle;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("authentication rejected (HTTP {0}); check {API_KEY_ENV}")]
    Auth(u16),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("cache I/O failed: {0}")]
    Cache(#[from] std::io::Error),
    #[error("temperature must be 0.0 for evaluation runs, got {0}")]
    NonZeroTemperature(f64),
}

impl GatewayError {
    /// Whether a retry could plausibly succeed.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            GatewayError::BackendUnavailable(_) | GatewayError::Timeout(_)
        )
    }
}

/// Which backend a model config dispatches to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChatCompletion,
    DeterministicMock,
}

/// Configuration for one evaluated model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backend: BackendKind,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub endpoint_url: String,
    #[serde(default = "default_request_timeout_ms")]
    pub request_timeout_ms: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_base_ms")]
    pub backoff_base_ms: u64,
}

fn default_max_output_tokens() -> u32 {
    2048
}

fn default_request_timeout_ms() -> u64 {
    60_000
}

fn default_max_retries() -> u32 {
    3
}

fn default_backoff_base_ms() -> u64 {
    1_000
}

const BACKOFF_CEILING_MS: u64 = 60_000;

impl ModelConfig {
    /// Evaluation runs require temperature 0.
    pub fn validate_for_eval(&self) -> Result<(), GatewayError> {
        if self.temperature != 0.0 {
            return Err(GatewayError::NonZeroTemperature(self.temperature));
        }
        Ok(())
    }

    pub fn mock(model_name: &str) -> ModelConfig {
        ModelConfig {
            backend: BackendKind::DeterministicMock,
            model_name: model_name.to_string(),
            temperature: 0.0,
            max_output_tokens: default_max_output_tokens(),
            endpoint_url: String::new(),
            request_timeout_ms: default_request_timeout_ms(),
            max_retries: default_max_retries(),
            backoff_base_ms: default_backoff_base_ms(),
        }
    }
}

/// Prompt and completion token counts, when the backend reports them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

/// An immutable cached model response keyed by (model_name, content_hash).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub content_hash: String,
    pub raw_text: String,
    pub latency_ms: u64,
    pub token_usage: Option<TokenUsage>,
    pub created_at: DateTime<Utc>,
}

/// What a backend returns for one dispatched prompt.
#[derive(Debug, Clone)]
pub struct BackendReply {
    pub text: String,
    pub token_usage: Option<TokenUsage>,
}

impl BackendReply {
    pub fn text_only(text: String) -> BackendReply {
        BackendReply {
            text,
            token_usage: None,
        }
    }
}

/// A chat-completion transport.
pub trait Backend: Send + Sync {
    fn send(&self, bundle: &PromptBundle, cfg: &ModelConfig)
        -> Result<BackendReply, GatewayError>;
    fn name(&self) -> &'static str;
}

/// Counting semaphore bounding in-flight backend requests.
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().unwrap();
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// Dispatcher for one model: cache in front, bounded retry behind.
pub struct Gateway {
    cfg: ModelConfig,
    backend: Arc<dyn Backend>,
    cache: ResponseCache,
    limiter: Semaphore,
    dispatched: AtomicU64,
    // Single-flight: hashes currently being fetched, so concurrent workers
    // asking for the same prompt produce one backend call, not several.
    inflight: Mutex<std::collections::HashSet<String>>,
    inflight_done: Condvar,
}

impl Gateway {
    /// Build a gateway from a model config, choosing the backend by kind.
    /// `seed` drives the deterministic mock; the model name is folded in so
    /// distinct mock models behave like distinct models. HTTP backends
    /// ignore it.
    pub fn from_config(
        cfg: ModelConfig,
        cache_dir: &std::path::Path,
        seed: u64,
        max_in_flight: usize,
    ) -> Result<Gateway, GatewayError> {
        let backend: Arc<dyn Backend> = match cfg.backend {
            BackendKind::DeterministicMock => {
                use sha2::Digest;
                let digest = sha2::Sha256::digest(cfg.model_name.as_bytes());
                let model_mix = u64::from_le_bytes(digest[..8].try_into().unwrap());
                Arc::new(MockBackend::new(seed ^ model_mix))
            }
            BackendKind::HttpChatCompletion => Arc::new(HttpBackend::new(&cfg)?),
        };
        Ok(Gateway::with_backend(cfg, cache_dir, backend, max_in_flight)?)
    }

    /// Build a gateway around an explicit backend (tests use counting fakes).
    pub fn with_backend(
        cfg: ModelConfig,
        cache_dir: &std::path::Path,
        backend: Arc<dyn Backend>,
        max_in_flight: usize,
    ) -> std::io::Result<Gateway> {
        Ok(Gateway {
            cfg,
            backend,
            cache: ResponseCache::new(cache_dir)?,
            limiter: Semaphore::new(max_in_flight),
            dispatched: AtomicU64::new(0),
            inflight: Mutex::new(std::collections::HashSet::new()),
            inflight_done: Condvar::new(),
        })
    }

    pub fn model_name(&self) -> &str {
        &self.cfg.model_name
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Number of requests actually sent to the backend (cache misses).
    pub fn dispatched_calls(&self) -> u64 {
        self.dispatched.load(Ordering::SeqCst)
    }

    /// Complete a prompt: cached response if present, otherwise dispatch
    /// with exponential backoff on transient failures and persist the
    /// response before returning it.
    pub fn complete(&self, bundle: &PromptBundle) -> Result<ModelResponse, GatewayError> {
        if let Some(hit) = self.cache.get(&self.cfg.model_name, &bundle.content_hash) {
            return Ok(hit);
        }

        let _flight = self.join_flight(&bundle.content_hash);
        // Another worker may have filled the entry while we waited.
        if let Some(hit) = self.cache.get(&self.cfg.model_name, &bundle.content_hash) {
            return Ok(hit);
        }

        let _permit = self.limiter.acquire();
        let mut attempt = 0u32;
        let (reply, latency) = loop {
            self.dispatched.fetch_add(1, Ordering::SeqCst);
            let started = Instant::now();
            match self.backend.send(bundle, &self.cfg) {
                Ok(reply) => break (reply, started.elapsed()),
                Err(err) if err.is_transient() && attempt < self.cfg.max_retries => {
                    std::thread::sleep(backoff_delay(self.cfg.backoff_base_ms, attempt));
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        };

        let response = ModelResponse {
            content_hash: bundle.content_hash.clone(),
            raw_text: reply.text,
            latency_ms: latency.as_millis() as u64,
            token_usage: reply.token_usage,
            created_at: Utc::now(),
        };
        self.cache.put(&self.cfg.model_name, &response)?;
        Ok(response)
    }

    /// Wait until no other worker is fetching this hash, then claim it.
    fn join_flight(&self, content_hash: &str) -> FlightGuard<'_> {
        let mut inflight = self.inflight.lock().unwrap();
        while inflight.contains(content_hash) {
            inflight = self.inflight_done.wait(inflight).unwrap();
        }
        inflight.insert(content_hash.to_string());
        FlightGuard {
            gateway: self,
            content_hash: content_hash.to_string(),
        }
    }
}

struct FlightGuard<'a> {
    gateway: &'a Gateway,
    content_hash: String,
}

impl Drop for FlightGuard<'_> {
    fn drop(&mut self) {
        let mut inflight = self.gateway.inflight.lock().unwrap();
        inflight.remove(&self.content_hash);
        self.gateway.inflight_done.notify_all();
    }
}

/// Exponential backoff: base * 2^attempt, jittered by 0.5..1.5, capped.
fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let raw = base_ms.saturating_mul(1u64 << attempt.min(16));
    let capped = raw.min(BACKOFF_CEILING_MS);
    let jitter = rand::rng().random_range(0.5..1.5);
    Duration::from_millis(((capped as f64) * jitter) as u64)
}
