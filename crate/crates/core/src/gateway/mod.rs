//! Completion backends.
//!
//! [`Gateway`] fronts either a live chat-completions endpoint or the
//! deterministic [`mock`] recommender. Live responses are cached on disk by
//! instruction fingerprint, so a prompt is never paid for twice; requests are
//! bounded both in flight and per minute, and transient failures are retried
//! with exponential backoff.

mod cache;
mod limiter;
mod live;
pub mod mock;

pub use cache::{cache_gc, ResponseCache};
pub use limiter::{Clock, ConcurrencyLimit, FakeClock, RateLimiter, SystemClock};
pub use live::{LiveClient, RetryPolicy, API_KEY_ENV};
pub use mock::{mock_complete, BiasConfig};

use crate::dataset::Catalog;
use crate::prompts::PromptInstruction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub endpoint_url: String,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            model_name: "gpt-3.5-turbo".into(),
            temperature: 0.0,
            max_tokens: 512,
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens < 256 {
            return Err(GatewayError::Config(format!(
                "max_tokens must be >= 256, got {}",
                self.max_tokens
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(GatewayError::Config("model_name is empty".into()));
        }
        Ok(())
    }
}

/// Stable content hash over the prompt text and the model parameters that
/// influence the completion. The endpoint URL is deliberately not part of it.
pub fn fingerprint(text: &str, params: &ModelParams) -> String {
    let mut h = Sha256::new();
    h.update(b"fairrec-v1\0");
    h.update(params.model_name.as_bytes());
    h.update([0]);
    h.update(params.temperature.to_bits().to_le_bytes());
    h.update(params.max_tokens.to_le_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSource {
    Live,
    Cache,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub instruction_fingerprint: String,
    pub text: String,
    pub source: ResponseSource,
    pub latency_ms: u64,
    /// Seconds since the Unix epoch; 0 for mock responses.
    pub retrieved_at: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("{0}")]
    Config(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request rejected with HTTP {status}: {body}")]
    Request { status: u16, body: String },
    #[error("cannot decode completion: {0}")]
    Decode(String),
    #[error("cache i/o: {0}")]
    Cache(#[from] std::io::Error),
}

/// Which completion source a [`Gateway`] talks to.
pub enum Backend {
    Live(LiveClient),
    Mock {
        catalog: Arc<Catalog>,
        bias: BiasConfig,
        seed: u64,
    },
}

pub struct Gateway {
    backend: Backend,
    params: ModelParams,
    cache: Option<ResponseCache>,
}

impl Gateway {
    pub fn live(client: LiveClient, params: ModelParams, cache: Option<ResponseCache>) -> Result<Self, GatewayError> {
        params.validate()?;
        Ok(Gateway {
            backend: Backend::Live(client),
            params,
            cache,
        })
    }

    pub fn mock(catalog: Arc<Catalog>, bias: BiasConfig, seed: u64) -> Result<Self, GatewayError> {
        bias.validate(&catalog)?;
        Ok(Gateway {
            backend: Backend::Mock { catalog, bias, seed },
            params: ModelParams::default(),
            cache: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    /// Completes `instruction`, consulting the cache first for live backends.
    pub fn complete(&self, instruction: &PromptInstruction) -> Result<RawResponse, GatewayError> {
        match &self.backend {
            Backend::Mock { catalog, bias, seed } => {
                Ok(mock_complete(instruction, catalog, bias, *seed))
            }
            Backend::Live(client) => {
                let key = fingerprint(&instruction.text, &self.params);
                if let Some(cache) = &self.cache {
                    if let Some(mut hit) = cache.get(&key)? {
                        hit.source = ResponseSource::Cache;
                        return Ok(hit);
                    }
                }
                let resp = client.complete(&key, &instruction.text, &self.params)?;
                if let Some(cache) = &self.cache {
                    cache.put(&resp)?;
                }
                Ok(resp)
            }
        }
    }
}
