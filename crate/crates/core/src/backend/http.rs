use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::BackendError;
use crate::prompt::PromptText;

use super::{require, Backend, BackendCapability, Mode, ScoredTargets};

/// Exponential backoff for transport failures. Application refusals
/// (non-2xx responses) are never retried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay_ms: 200,
            max_delay_ms: 5_000,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    /// Base URL; `/score` and `/generate` are appended.
    pub endpoint: String,
    pub retry: RetryPolicy,
    pub max_inflight: usize,
    pub timeout_ms: u64,
    pub capability: BackendCapability,
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            retry: RetryPolicy::default(),
            max_inflight: 8,
            timeout_ms: 60_000,
            capability: BackendCapability::BOTH,
        }
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prompt: &'a str,
    targets: &'a [&'a str],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_new_tokens: usize,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Inflight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Inflight);

impl Inflight {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for a remote model server speaking the JSON score/generate protocol.
///
/// `POST {endpoint}/score` with `{"prompt", "targets"}` answers
/// `{"scores"}` (natural-log likelihoods aligned with `targets`);
/// `POST {endpoint}/generate` with `{"prompt", "max_new_tokens"}` answers
/// `{"text"}`. One prompt per request.
#[derive(Debug)]
pub struct HttpBackend {
    name: String,
    config: HttpBackendConfig,
    agent: ureq::Agent,
    inflight: Inflight,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        Self {
            name: format!("http:{}", config.endpoint),
            inflight: Inflight::new(config.max_inflight),
            config,
            agent,
        }
    }

    pub fn config(&self) -> &HttpBackendConfig {
        &self.config
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> Result<Resp, BackendError> {
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let attempts = self.config.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.inflight.acquire();
                self.agent.post(&url).send_json(body)
            };
            match result {
                Ok(resp) => {
                    return resp
                        .into_json::<Resp>()
                        .map_err(|e| BackendError::Protocol(format!("{url}: {e}")));
                }
                Err(ureq::Error::Status(status, resp)) => {
                    let message = resp.into_string().unwrap_or_default();
                    return Err(BackendError::Refused { status, message });
                }
                Err(ureq::Error::Transport(t)) => {
                    if attempt >= attempts {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            message: t.to_string(),
                        });
                    }
                    let delay = self.config.retry.delay(attempt);
                    warn!("{url}: transport error ({t}); retry {attempt}/{} in {delay:?}", attempts - 1);
                    thread::sleep(delay);
                }
            }
        }
    }
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn capability(&self) -> BackendCapability {
        self.config.capability
    }

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
        require(self, Mode::Scoring)?;
        if targets.is_empty() {
            return Err(BackendError::Protocol("no targets to score".into()));
        }
        let resp: ScoreResponse = self.post(
            "score",
            &ScoreRequest {
                prompt: &prompt.text,
                targets,
            },
        )?;
        if resp.scores.len() != targets.len() {
            return Err(BackendError::Protocol(format!(
                "expected {} scores, got {}",
                targets.len(),
                resp.scores.len()
            )));
        }
        Ok(ScoredTargets::new(
            targets.iter().map(|t| t.to_string()).zip(resp.scores).collect(),
        ))
    }

    fn generate(&self, prompt: &PromptText, max_new_tokens: usize) -> Result<String, BackendError> {
        require(self, Mode::Generation)?;
        let resp: GenerateResponse = self.post(
            "generate",
            &GenerateRequest {
                prompt: &prompt.text,
                max_new_tokens,
            },
        )?;
        Ok(resp.text)
    }
}
