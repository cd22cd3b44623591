//! Blocking client for an OpenAI-style `/v1/chat/completions` endpoint.

use std::time::Duration;

use rand::Rng as _;
use serde_json::{json, Value};

use super::{Backend, CompletionRequest, Generation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub base_url: String,
    /// Environment variable holding a bearer token, if any.
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    pub max_attempts: u32,
    pub backoff: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key_env: None,
            timeout: Duration::from_secs(60),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    cfg: HttpConfig,
}

enum Attempt {
    Done(String),
    Retry(Error),
    Fail(Error),
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self> {
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::validation(format!("environment variable `{var}` is not set"))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/v1/chat/completions", cfg.base_url.trim_end_matches('/')),
            api_key,
            cfg,
        })
    }

    pub fn request_body(request: &CompletionRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": request.prompt}));
        json!({
            "model": request.model,
            "messages": messages,
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
            "max_tokens": request.max_tokens,
        })
    }

    fn attempt(&self, body: &str) -> Attempt {
        let mut req = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry(Error::Transport {
                    attempts: 0,
                    msg: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry(Error::Transport {
                    attempts: 0,
                    msg: e.to_string(),
                })
            }
        };
        match status {
            200..=299 => match extract_content(&text) {
                Some(content) => Attempt::Done(content),
                None => Attempt::Fail(Error::Transport {
                    attempts: 0,
                    msg: format!("response has no choices[0].message.content: {text}"),
                }),
            },
            429 | 500..=599 => Attempt::Retry(Error::Http { status, body: text }),
            _ => Attempt::Fail(Error::Http { status, body: text }),
        }
    }
}

fn extract_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v.get("choices")?
        .get(0)?
        .get("message")?
        .get("content")?
        .as_str()
        .map(str::to_string)
}

fn with_attempts(e: Error, attempts: u32) -> Error {
    match e {
        Error::Transport { msg, .. } => Error::Transport { attempts, msg },
        other => other,
    }
}

impl Backend for HttpBackend {
    fn generate(&self, request: &CompletionRequest) -> Result<Generation> {
        let body = Self::request_body(request).to_string();
        let attempts = self.cfg.max_attempts.max(1);
        let mut last = None;
        for n in 1..=attempts {
            match self.attempt(&body) {
                Attempt::Done(text) => {
                    return Ok(Generation {
                        text,
                        retries: n - 1,
                    })
                }
                Attempt::Fail(e) => return Err(with_attempts(e, n)),
                Attempt::Retry(e) => {
                    log::debug!("attempt {n}/{attempts} failed: {e}");
                    last = Some(e);
                    if n < attempts {
                        let jitter = rand::rng().random_range(0.5..1.5);
                        std::thread::sleep(
                            self.cfg.backoff.mul_f64(2f64.powi(n as i32 - 1) * jitter),
                        );
                    }
                }
            }
        }
        Err(with_attempts(last.expect("at least one attempt"), attempts))
    }
}
