use std::error::Error as _;
use std::io;
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::{parse_verdict, PatchRequest, Verdict, VerdictSource, Verifier, VerifyError, PATCH_PROMPT};

/// Environment variable holding the bearer token for the model endpoint.
pub const API_KEY_ENV: &str = "ELSS_VLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Total number of attempts per request.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    /// First backoff delay; doubles after every failed attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

fn default_max_retries() -> u32 {
    3
}

fn default_timeout_s() -> f64 {
    30.0
}

fn default_backoff_ms() -> u64 {
    1000
}

impl EndpointConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            max_retries: default_max_retries(),
            timeout_s: default_timeout_s(),
            backoff_base_ms: default_backoff_ms(),
        }
    }
}

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    prompt: &'a str,
    image_base64: String,
}

#[derive(Deserialize)]
struct ResponseBody {
    text: String,
}

enum Failure {
    Timeout,
    Transient(String),
    Fatal(VerifyError),
}

/// Verifier that posts each patch to a vision-language model endpoint.
///
/// Wire contract: request `{"model", "prompt", "image_base64"}`, reply
/// `{"text"}`. Transient failures (timeouts, connection errors, HTTP 429 and
/// 5xx) are retried with exponential backoff; 401/403 fail immediately.
#[derive(Debug, Clone)]
pub struct RemoteVerifier {
    config: EndpointConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteVerifier {
    pub fn new(config: EndpointConfig, api_key: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_s.max(0.001)))
            .build();
        Self {
            config,
            api_key: api_key.filter(|k| !k.is_empty()),
            agent,
        }
    }

    /// Reads the credential from [`API_KEY_ENV`].
    pub fn from_env(config: EndpointConfig) -> Self {
        Self::new(config, std::env::var(API_KEY_ENV).ok())
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn attempt(&self, api_key: &str, body: &RequestBody<'_>, candidate: &str) -> Result<String, Failure> {
        let result = self
            .agent
            .post(&self.config.endpoint_url)
            .set("Authorization", &format!("Bearer {api_key}"))
            .send_json(body);
        match result {
            Ok(resp) => {
                let parsed: ResponseBody = resp.into_json().map_err(|e| {
                    Failure::Fatal(VerifyError::MalformedResponse {
                        candidate: candidate.to_string(),
                        message: e.to_string(),
                    })
                })?;
                Ok(parsed.text)
            }
            Err(ureq::Error::Status(code @ (401 | 403), _)) => Err(Failure::Fatal(VerifyError::AuthFailure {
                candidate: candidate.to_string(),
                message: format!("HTTP {code}"),
            })),
            Err(ureq::Error::Status(code, _)) if code == 429 || code >= 500 => {
                Err(Failure::Transient(format!("HTTP {code}")))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                Err(Failure::Fatal(VerifyError::Transport {
                    candidate: candidate.to_string(),
                    attempts: 1,
                    message: format!("HTTP {code}: {text}"),
                }))
            }
            Err(ureq::Error::Transport(t)) if is_timeout(&t) => Err(Failure::Timeout),
            Err(ureq::Error::Transport(t)) => Err(Failure::Transient(t.to_string())),
        }
    }
}

fn is_timeout(t: &ureq::Transport) -> bool {
    let mut source = t.source();
    while let Some(err) = source {
        if let Some(io) = err.downcast_ref::<io::Error>() {
            if matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
                return true;
            }
        }
        source = err.source();
    }
    t.to_string().contains("timed out")
}

impl Verifier for RemoteVerifier {
    fn verify(&self, request: &PatchRequest) -> Result<Verdict, VerifyError> {
        let candidate = request.candidate_id.as_str();
        let Some(api_key) = self.api_key.as_deref() else {
            return Err(VerifyError::AuthFailure {
                candidate: candidate.to_string(),
                message: format!("{API_KEY_ENV} is not set"),
            });
        };
        let body = RequestBody {
            model: &self.config.model_name,
            prompt: PATCH_PROMPT,
            image_base64: base64::engine::general_purpose::STANDARD.encode(&request.image_png),
        };

        let attempts = self.config.max_retries.max(1);
        let mut last = Failure::Transient(String::new());
        for attempt in 1..=attempts {
            match self.attempt(api_key, &body, candidate) {
                Ok(text) => {
                    let mut verdict = parse_verdict(&text).with_model(self.config.model_name.clone());
                    verdict.source = VerdictSource::RemoteModel;
                    return Ok(verdict);
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(f) => last = f,
            }
            if attempt < attempts {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
        }
        Err(match last {
            Failure::Timeout => VerifyError::Timeout {
                candidate: candidate.to_string(),
                attempts,
            },
            Failure::Transient(message) => VerifyError::Transport {
                candidate: candidate.to_string(),
                attempts,
                message,
            },
            Failure::Fatal(e) => e,
        })
    }
}
