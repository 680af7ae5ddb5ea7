use super::{BackendError, CriticBackend, CriticRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::Duration;

/// Environment variable holding the bearer token. Credentials never appear
/// in configs or logs.
pub const API_KEY_ENV: &str = "REGOT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 5, initial_backoff_ms: 1000, max_backoff_ms: 30_000 }
    }
}

impl RetryPolicy {
    /// Wait before retry `n` (0-based): `initial * 2^n`, capped.
    pub fn delay(&self, n: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64.checked_shl(n).unwrap_or(u64::MAX));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }

    /// Upper bound on the total time spent sleeping between attempts.
    pub fn max_total_wait(&self) -> Duration {
        (0..self.max_retries).map(|n| self.delay(n)).sum()
    }
}

fn default_api_key_env() -> String {
    API_KEY_ENV.to_string()
}

fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Per-request timeout.
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl RemoteConfig {
    pub fn new(endpoint: &str, model: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            temperature: 0.0,
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(format!("endpoint `{}` must be an http(s) URL", self.endpoint));
        }
        if self.model.trim().is_empty() {
            return Err("model must not be empty".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err("temperature must lie in [0, 2]".into());
        }
        if self.timeout_secs == 0 {
            return Err("timeout_secs must be at least 1".into());
        }
        Ok(())
    }
}

/// Chat-completion client. Retries transport errors, 429 and 5xx responses
/// with exponential backoff; other 4xx responses fail immediately.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    log: Option<PathBuf>,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, log: Option<PathBuf>) -> Result<Self, String> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .new_agent();
        Ok(Self { config, agent, log })
    }

    fn log(&self, body: &Value, authorized: bool, outcome: Value) {
        let Some(path) = &self.log else { return };
        let line = json!({
            "endpoint": self.config.endpoint,
            "authorization": if authorized { "Bearer [REDACTED]" } else { "none" },
            "request": body,
            "outcome": outcome,
        });
        let written = OpenOptions::new().create(true).append(true).open(path).and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            tracing::warn!("could not append to {}: {e}", path.display());
        }
    }
}

fn extract_content(text: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(text).map_err(|e| BackendError::Response(format!("not JSON: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Response("missing choices[0].message.content".into()))
}

impl CriticBackend for RemoteBackend {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": request.messages,
        });
        let key = std::env::var(&self.config.api_key_env).ok().filter(|k| !k.is_empty());
        let policy = self.config.retry;
        let mut last = String::new();
        for attempt in 0..=policy.max_retries {
            if attempt > 0 {
                std::thread::sleep(policy.delay(attempt - 1));
            }
            let mut call = self.agent.post(&self.config.endpoint);
            if let Some(k) = &key {
                call = call.header("Authorization", &format!("Bearer {k}"));
            }
            match call.send_json(&body) {
                Ok(mut response) => {
                    let status = response.status().as_u16();
                    let text = match response.body_mut().read_to_string() {
                        Ok(t) => t,
                        Err(e) => {
                            last = format!("reading response body: {e}");
                            self.log(&body, key.is_some(), json!({ "status": status, "error": last }));
                            continue;
                        }
                    };
                    self.log(&body, key.is_some(), json!({ "status": status, "body": text }));
                    if status == 429 || status >= 500 {
                        last = format!("HTTP {status}");
                        continue;
                    }
                    if status >= 400 {
                        return Err(BackendError::Http { status, body: text });
                    }
                    return extract_content(&text);
                }
                Err(e) => {
                    last = e.to_string();
                    self.log(&body, key.is_some(), json!({ "error": last }));
                }
            }
            tracing::warn!(attempt, "critic request failed: {last}");
        }
        Err(BackendError::Transport { attempts: policy.max_retries as usize + 1, message: last })
    }
}
