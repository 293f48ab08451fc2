//! Provider settings, the HTTP client, and batched calls.

mod batch;
mod http;

pub use batch::{batch_embed, batch_logprob, run_bounded};
pub use http::{HttpProvider, RetryPolicy};

use qads_core::provider::{
    EmbeddingResponse, LanguageModel, LogProbRequest, LogProbResponse, MockProvider, ProviderError,
};
use serde::{Deserialize, Serialize};

pub const ENV_URL: &str = "QADS_PROVIDER_URL";
pub const ENV_TOKEN: &str = "QADS_PROVIDER_TOKEN";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Http,
    Mock,
}

fn default_timeout() -> u64 {
    60
}

fn default_parallelism() -> usize {
    4
}

fn default_mock_dim() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSettings {
    #[serde(default)]
    pub kind: ProviderKind,
    #[serde(default)]
    pub url: Option<String>,
    /// Sent verbatim as the `Authorization` header.
    #[serde(default, skip_serializing)]
    pub token: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub mock_seed: u64,
    #[serde(default = "default_mock_dim")]
    pub mock_dim: usize,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            kind: ProviderKind::default(),
            url: None,
            token: None,
            timeout_secs: default_timeout(),
            parallelism: default_parallelism(),
            mock_seed: 0,
            mock_dim: default_mock_dim(),
        }
    }
}

impl ProviderSettings {
    /// Applies `QADS_PROVIDER_URL` / `QADS_PROVIDER_TOKEN` when set.
    pub fn apply_env(&mut self) {
        self.apply_overrides(std::env::var(ENV_URL).ok(), std::env::var(ENV_TOKEN).ok());
    }

    pub fn apply_overrides(&mut self, url: Option<String>, token: Option<String>) {
        if let Some(u) = url.filter(|u| !u.is_empty()) {
            self.url = Some(u);
        }
        if let Some(t) = token.filter(|t| !t.is_empty()) {
            self.token = Some(t);
        }
    }

    /// Every problem with the settings, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.parallelism == 0 {
            out.push("provider.parallelism must be >= 1".to_string());
        }
        match self.kind {
            ProviderKind::Http => {
                if self.url.as_deref().is_none_or(str::is_empty) {
                    out.push(format!("provider.url is required (set it in the config or {ENV_URL})"));
                }
                if self.timeout_secs == 0 {
                    out.push("provider.timeout_secs must be >= 1".to_string());
                }
            }
            ProviderKind::Mock => {
                if self.mock_dim == 0 {
                    out.push("provider.mock_dim must be >= 1".to_string());
                }
            }
        }
        out
    }

    pub fn build(&self) -> crate::Result<AnyProvider> {
        let problems = self.problems();
        if !problems.is_empty() {
            return Err(crate::Error::Config(problems));
        }
        Ok(match self.kind {
            ProviderKind::Mock => {
                AnyProvider::Mock(MockProvider::new(self.mock_seed, self.mock_dim).expect("validated dimension"))
            }
            ProviderKind::Http => AnyProvider::Http(HttpProvider::new(
                self.url.clone().expect("validated url"),
                self.token.clone(),
                std::time::Duration::from_secs(self.timeout_secs),
                RetryPolicy::default(),
            )),
        })
    }
}

/// Provider chosen at run time from settings.
pub enum AnyProvider {
    Mock(MockProvider),
    Http(HttpProvider),
}

impl LanguageModel for AnyProvider {
    fn logprob(&self, req: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        match self {
            AnyProvider::Mock(m) => m.logprob(req),
            AnyProvider::Http(h) => h.logprob(req),
        }
    }

    fn embed(&self, text: &str) -> Result<EmbeddingResponse, ProviderError> {
        match self {
            AnyProvider::Mock(m) => m.embed(text),
            AnyProvider::Http(h) => h.embed(text),
        }
    }

    fn identity(&self) -> String {
        match self {
            AnyProvider::Mock(m) => m.identity(),
            AnyProvider::Http(h) => h.identity(),
        }
    }
}
