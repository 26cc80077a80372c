use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Endpoint settings for a remote planner or critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// `http://host:port`, without a trailing path.
    pub base_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Extra attempts after a timeout, transport error or 5xx status.
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Environment variable holding a bearer token, if the endpoint wants one.
    #[serde(default)]
    pub token_env: Option<String>,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(base_url: &str) -> Self {
        Self { base_url: base_url.to_string(), timeout_ms: default_timeout_ms(), retries: default_retries(), token_env: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::Config(format!("base url '{}' must start with http:// or https://", self.base_url)));
        }
        if self.timeout_ms == 0 {
            return Err(Error::Config("remote timeout must be positive".into()));
        }
        Ok(())
    }
}

/// One HTTP attempt, as recorded for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub endpoint: String,
    pub attempt: u32,
    /// HTTP status, absent when the attempt failed before a response.
    pub status: Option<u16>,
    pub error: Option<String>,
    pub request: String,
    pub response: String,
    pub request_sha256: String,
    pub response_sha256: String,
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON-over-HTTP client with retries and a transcript of every attempt.
/// Safe to share between threads.
pub struct WireClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    token: Option<String>,
    transcript: Mutex<Vec<Exchange>>,
}

impl std::fmt::Debug for WireClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WireClient").field("config", &self.config).finish_non_exhaustive()
    }
}

impl WireClient {
    /// Validates the config and resolves the token before any call.
    pub fn new(config: RemoteConfig) -> Result<Self> {
        config.validate()?;
        let token = match &config.token_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| Error::Config(format!("token variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, agent, token, transcript: Mutex::new(Vec::new()) })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    pub fn transcript(&self) -> Vec<Exchange> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    /// One compact JSON object per attempt: endpoint, attempt, status,
    /// request and response bodies.
    pub fn transcript_jsonl(&self) -> String {
        self.transcript()
            .iter()
            .map(|e| {
                serde_json::json!({
                    "endpoint": e.endpoint,
                    "attempt": e.attempt,
                    "status": e.status,
                    "request": e.request,
                    "response": e.response,
                })
                .to_string()
                    + "\n"
            })
            .collect()
    }

    fn record(&self, endpoint: &str, attempt: u32, status: Option<u16>, error: Option<String>, request: &str, response: &str) {
        let e = Exchange {
            endpoint: endpoint.to_string(),
            attempt,
            status,
            error,
            request: request.to_string(),
            response: response.to_string(),
            request_sha256: sha256_hex(request),
            response_sha256: sha256_hex(response),
        };
        log::info!(
            "{} attempt {} status {:?} request {} response {}",
            e.endpoint,
            attempt,
            status,
            &e.request_sha256[..12],
            &e.response_sha256[..12]
        );
        if let Some(err) = &e.error {
            log::warn!("{endpoint} attempt {attempt} failed: {err}");
        }
        self.transcript.lock().expect("transcript lock").push(e);
    }

    /// POSTs a JSON body and returns the raw 2xx response body. Timeouts,
    /// transport errors and 5xx statuses are retried; other statuses fail
    /// at once.
    pub fn post(&self, endpoint: &str, body: &impl Serialize) -> Result<String> {
        let request = serde_json::to_string(body)?;
        let url = format!("{}{endpoint}", self.config.base_url.trim_end_matches('/'));
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            let mut call = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(t) = &self.token {
                call = call.header("Authorization", format!("Bearer {t}"));
            }
            match call.send(request.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    self.record(endpoint, attempt, Some(status), None, &request, &text);
                    match status {
                        200..=299 => return Ok(text),
                        500..=599 => last = format!("status {status}: {text}"),
                        _ => return Err(Error::Transport(format!("{url} returned {status}: {text}"))),
                    }
                }
                Err(e) => {
                    self.record(endpoint, attempt, None, Some(e.to_string()), &request, "");
                    last = e.to_string();
                }
            }
        }
        Err(Error::Transport(format!("{url} failed after {} attempts: {last}", self.config.retries + 1)))
    }
}
