use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout_s: u64,
    pub max_retries: u32,
    pub temperature: f64,
    /// Used once when the endpoint rejects `temperature`.
    pub temperature_fallback: f64,
    pub max_parallel: usize,
    /// First retry delay; doubles on each further retry.
    pub backoff_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_name: "llava-onevision-qwen2-7b-ov".into(),
            api_key_env: None,
            timeout_s: 120,
            max_retries: 3,
            temperature: 0.0,
            temperature_fallback: 0.1,
            max_parallel: 4,
            backoff_ms: 500,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout_s == 0 {
            return Err(Error::Config("timeout_s must be positive".into()));
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("max_parallel must be at least 1".into()));
        }
        for (name, t) in [("temperature", self.temperature), ("temperature_fallback", self.temperature_fallback)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {t}")));
            }
        }
        if self.base_url.is_empty() {
            return Err(Error::Config("base_url is empty".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    /// Reads the bearer token from the configured variable.
    pub fn credential(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| Error::MissingCredential(var.clone())),
        }
    }
}
