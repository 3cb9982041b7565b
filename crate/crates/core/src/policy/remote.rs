use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, PolicySession};

pub const DEFAULT_TOKEN_ENV: &str = "SEARCHDEPTH_API_TOKEN";

/// Client settings for a `POST {base_url}/generate` text endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout_secs: f64,
    /// Extra attempts after the first one.
    pub retries: u32,
    pub backoff_ms: u64,
    /// Environment variable holding a bearer token; unset means no header.
    pub token_env: String,
    /// Sent only when set; decoding is greedy otherwise.
    pub temperature: Option<f64>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080".into(),
            timeout_secs: 60.0,
            retries: 2,
            backoff_ms: 250,
            token_env: DEFAULT_TOKEN_ENV.into(),
            temperature: None,
        }
    }
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_tokens: usize,
    stop: &'a [&'a str],
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct RemoteSession {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
    config: RemoteConfig,
}

impl RemoteSession {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if !(config.timeout_secs.is_finite() && config.timeout_secs > 0.0) {
            return Err(BackendError::Config(format!("timeout_secs must be positive, got {}", config.timeout_secs)));
        }
        if !config.base_url.starts_with("http://") && !config.base_url.starts_with("https://") {
            return Err(BackendError::Config(format!("base_url must be an http(s) URL, got {:?}", config.base_url)));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/generate", config.base_url.trim_end_matches('/'));
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        Ok(Self { agent, url, token, config })
    }

    fn attempt(&self, body: &GenerateRequest<'_>) -> Result<Result<String, BackendError>, BackendError> {
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        // Outer error: retryable. Inner error: final.
        let mut resp = req
            .send_json(body)
            .map_err(|e| BackendError::Transport { status: None, message: e.to_string() })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let err = BackendError::Transport { status: Some(status), message: format!("{} answered {status}", self.url) };
            return if status >= 500 || status == 429 { Err(err) } else { Ok(Err(err)) };
        }
        Ok(resp
            .body_mut()
            .read_json::<GenerateResponse>()
            .map(|r| r.text)
            .map_err(|e| BackendError::Protocol(format!("bad response body: {e}"))))
    }
}

impl PolicySession for RemoteSession {
    fn generate(&mut self, prompt: &str, stop: &[&str], max_new_tokens: usize) -> Result<String, BackendError> {
        let body = GenerateRequest { prompt, max_tokens: max_new_tokens, stop, temperature: self.config.temperature };
        let mut last = None;
        for attempt in 0..=self.config.retries {
            if attempt > 0 && self.config.backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.config.backoff_ms * u64::from(attempt)));
            }
            match self.attempt(&body) {
                Ok(done) => return done,
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt runs"))
    }
}
