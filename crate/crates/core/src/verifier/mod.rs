//! Safe/unsafe verification of proposed landing patches.
//!
//! The proposal loop talks to a [`Verifier`] and never learns which backend
//! answered: the deterministic [`RuleOracle`] used offline and in tests, or the
//! [`RemoteVerifier`] that queries a vision-language model over HTTP.

mod oracle;
mod parse;
mod patch;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{rule_oracle_verify, HazardLayer, RuleOracle};
pub use parse::{build_patch_prompt, parse_verdict, PATCH_PROMPT, UNPARSEABLE_REASON};
pub use patch::{PatchRequest, PatchSource};
pub use remote::{EndpointConfig, RemoteVerifier, API_KEY_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictLabel {
    Safe,
    Unsafe,
}

impl VerdictLabel {
    pub fn is_safe(self) -> bool {
        self == Self::Safe
    }
}

impl std::fmt::Display for VerdictLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Safe => "safe",
            Self::Unsafe => "unsafe",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSource {
    RuleOracle,
    RemoteModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: VerdictLabel,
    /// One-sentence justification; never empty.
    pub reason: String,
    pub source: VerdictSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

impl Verdict {
    pub fn new(label: VerdictLabel, reason: impl Into<String>, source: VerdictSource) -> Self {
        let mut reason = reason.into();
        if reason.trim().is_empty() {
            reason = "no reason given".to_string();
        }
        Self {
            label,
            reason,
            source,
            model_name: None,
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model_name = Some(model.into());
        self
    }

    pub fn is_safe(&self) -> bool {
        self.label.is_safe()
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("candidate {candidate}: request timed out after {attempts} attempt(s)")]
    Timeout { candidate: String, attempts: u32 },
    #[error("candidate {candidate}: authentication failed: {message}")]
    AuthFailure { candidate: String, message: String },
    #[error("candidate {candidate}: malformed response: {message}")]
    MalformedResponse { candidate: String, message: String },
    #[error("candidate {candidate}: transport failure after {attempts} attempt(s): {message}")]
    Transport {
        candidate: String,
        attempts: u32,
        message: String,
    },
    #[error("candidate {candidate}: bounding box outside the hazard layer")]
    OutOfBounds { candidate: String },
    #[error("patch encoding failed: {0}")]
    Patch(String),
}

impl VerifyError {
    /// Identity of the candidate being verified when the error occurred.
    pub fn candidate(&self) -> Option<&str> {
        match self {
            Self::Timeout { candidate, .. }
            | Self::AuthFailure { candidate, .. }
            | Self::MalformedResponse { candidate, .. }
            | Self::Transport { candidate, .. }
            | Self::OutOfBounds { candidate } => Some(candidate),
            Self::Patch(_) => None,
        }
    }
}

/// Backend answering whether a proposed patch is safe to land on.
pub trait Verifier {
    fn verify(&self, request: &PatchRequest) -> Result<Verdict, VerifyError>;
}

impl<F> Verifier for F
where
    F: Fn(&PatchRequest) -> Result<Verdict, VerifyError>,
{
    fn verify(&self, request: &PatchRequest) -> Result<Verdict, VerifyError> {
        self(request)
    }
}

