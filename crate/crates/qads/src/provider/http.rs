use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use qads_core::provider::{EmbeddingResponse, LanguageModel, LogProbRequest, LogProbResponse, ProviderError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

#[derive(Serialize)]
struct LogProbBody<'a> {
    context: &'a str,
    continuation: &'a str,
}

#[derive(Deserialize)]
struct LogProbWire {
    token_logprobs: Vec<f64>,
    token_count: usize,
}

#[derive(Serialize)]
struct EmbedBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedWire {
    vector: Vec<f32>,
}

#[derive(Deserialize)]
struct ErrorWire {
    error: String,
}

/// Client for the `/v1/logprob` and `/v1/embed` endpoints.
pub struct HttpProvider {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
    retry: RetryPolicy,
    dim: OnceLock<usize>,
}

impl HttpProvider {
    pub fn new(base: impl Into<String>, token: Option<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpProvider {
            agent,
            base: base.into().trim_end_matches('/').to_string(),
            token,
            retry,
            dim: OnceLock::new(),
        }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ProviderError> {
        let url = format!("{}{}", self.base, path);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let err = match self.send(&url, body) {
                Ok(v) => return Ok(v),
                Err(e) => e,
            };
            if !err.is_retryable() {
                return Err(err);
            }
            if attempt >= self.retry.attempts {
                return Err(match err {
                    ProviderError::Transport { message, .. } => ProviderError::Transport {
                        attempts: attempt,
                        message,
                    },
                    other => other,
                });
            }
            thread::sleep(self.retry.backoff(attempt));
        }
    }

    fn send<B: Serialize, T: DeserializeOwned>(&self, url: &str, body: &B) -> Result<T, ProviderError> {
        let mut req = self.agent.post(url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", t);
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::BadUri(m) => ProviderError::Precondition(format!("bad url {url}: {m}")),
            other => ProviderError::Transport {
                attempts: 1,
                message: other.to_string(),
            },
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| ProviderError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if status != 200 {
            let message = serde_json::from_str::<ErrorWire>(&text)
                .map(|w| w.error)
                .unwrap_or(text);
            return Err(ProviderError::Remote { status, message });
        }
        serde_json::from_str(&text).map_err(|e| ProviderError::Protocol(format!("bad response body: {e}")))
    }
}

impl LanguageModel for HttpProvider {
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        req.validate()?;
        let wire: LogProbWire = self.post(
            "/v1/logprob",
            &LogProbBody {
                context: &req.context,
                continuation: &req.continuation,
            },
        )?;
        LogProbResponse::from_wire(wire.token_logprobs, wire.token_count)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::Precondition("empty text".to_string()));
        }
        let wire: EmbedWire = self.post("/v1/embed", &EmbedBody { text })?;
        let resp = EmbeddingResponse::new(wire.vector)?;
        let dim = *self.dim.get_or_init(|| resp.dim());
        if resp.dim() != dim {
            return Err(ProviderError::Protocol(format!(
                "embedding dimension {} differs from earlier {dim}",
                resp.dim()
            )));
        }
        Ok(resp)
    }

    fn identity(&self) -> String {
        format!("http:{}", self.base)
    }
}
