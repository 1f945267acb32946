use super::limiter::{Clock, ConcurrencyLimit, RateLimiter, SystemClock};
use super::{GatewayError, ModelParams, RawResponse, ResponseSource};
use serde_json::{json, Value};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

pub const API_KEY_ENV: &str = "CFAIR_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Delay slept after failed attempt number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        self.base.mul_f64(self.factor.powi(attempt.saturating_sub(1) as i32))
    }
}

/// Blocking chat-completions client.
pub struct LiveClient {
    api_key: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    clock: Arc<dyn Clock>,
    limiter: RateLimiter,
    in_flight: ConcurrencyLimit,
    requests: AtomicUsize,
}

impl LiveClient {
    /// Reads the API key from `CFAIR_API_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        match std::env::var(API_KEY_ENV) {
            Ok(k) if !k.trim().is_empty() => Ok(Self::with_api_key(k)),
            _ => Err(GatewayError::Config(format!(
                "environment variable {API_KEY_ENV} is not set"
            ))),
        }
    }

    pub fn with_api_key(api_key: impl Into<String>) -> Self {
        let clock: Arc<dyn Clock> = Arc::new(SystemClock::default());
        LiveClient {
            api_key: api_key.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
            retry: RetryPolicy::default(),
            limiter: RateLimiter::new(60, clock.clone()),
            clock,
            in_flight: ConcurrencyLimit::new(4),
            requests: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Replaces the clock; the rate limiter is rebuilt against it.
    pub fn with_clock(mut self, clock: Arc<dyn Clock>, per_minute: usize) -> Self {
        self.limiter = RateLimiter::new(per_minute, clock.clone());
        self.clock = clock;
        self
    }

    pub fn with_limits(mut self, per_minute: usize, max_in_flight: usize) -> Self {
        self.limiter = RateLimiter::new(per_minute, self.clock.clone());
        self.in_flight = ConcurrencyLimit::new(max_in_flight);
        self
    }

    /// HTTP requests sent so far, retries included.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn complete(&self, fingerprint: &str, prompt: &str, params: &ModelParams) -> Result<RawResponse, GatewayError> {
        let body = json!({
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = self.clock.now();
            let outcome = {
                let _permit = self.in_flight.acquire();
                self.limiter.acquire();
                self.requests.fetch_add(1, Ordering::SeqCst);
                self.agent
                    .post(&params.endpoint_url)
                    .set("Authorization", &format!("Bearer {}", self.api_key))
                    .set("Content-Type", "application/json")
                    .send_json(body.clone())
            };
            let retry_reason = match outcome {
                Ok(resp) => {
                    let text = resp
                        .into_string()
                        .map_err(|e| GatewayError::Decode(e.to_string()))?;
                    let content = extract_content(&text)?;
                    return Ok(RawResponse {
                        instruction_fingerprint: fingerprint.to_string(),
                        text: content,
                        source: ResponseSource::Live,
                        latency_ms: (self.clock.now().saturating_sub(started)).as_millis() as u64,
                        retrieved_at: SystemTime::now()
                            .duration_since(UNIX_EPOCH)
                            .map(|d| d.as_secs())
                            .unwrap_or(0),
                    });
                }
                Err(ureq::Error::Status(code, resp)) if code == 429 || code >= 500 => {
                    let _ = resp.into_string();
                    format!("HTTP {code}")
                }
                Err(ureq::Error::Status(code, resp)) => {
                    return Err(GatewayError::Request {
                        status: code,
                        body: resp.into_string().unwrap_or_default(),
                    });
                }
                Err(ureq::Error::Transport(t)) => t.to_string(),
            };
            if attempt >= self.retry.max_attempts {
                return Err(GatewayError::Transport {
                    attempts: attempt,
                    message: retry_reason,
                });
            }
            self.clock.sleep(self.retry.delay(attempt));
        }
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions body.
pub(crate) fn extract_content(body: &str) -> Result<String, GatewayError> {
    let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::Decode(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::Decode("missing choices[0].message.content".into()))?;
    if content.trim().is_empty() {
        return Err(GatewayError::Decode("empty completion".into()));
    }
    Ok(content.to_string())
}
