//! Comparator backends: anything that can score fixed target strings for a
//! prompt, generate free text for it, or both.

mod http;
mod noisy;
mod oracle;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use http::{HttpBackend, HttpBackendConfig, RetryPolicy};
pub use noisy::{NoiseConfig, NoisyBackend, UNDECIDED_TEXT};
pub use oracle::OracleBackend;

use crate::error::BackendError;
use crate::prompt::PromptText;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCapability {
    pub supports_scoring: bool,
    pub supports_generation: bool,
}

impl BackendCapability {
    pub const BOTH: Self = Self {
        supports_scoring: true,
        supports_generation: true,
    };

    pub fn supports(&self, mode: Mode) -> bool {
        match mode {
            Mode::Scoring => self.supports_scoring,
            Mode::Generation => self.supports_generation,
        }
    }
}

/// How a pairwise answer is obtained from the backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Compare log-likelihoods of the fixed targets.
    Scoring,
    /// Generate text and parse it.
    Generation,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Scoring => "scoring",
            Mode::Generation => "generation",
        }
    }
}

/// Natural-log likelihood per target, in request order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredTargets(Vec<(String, f64)>);

impl ScoredTargets {
    pub fn new(pairs: Vec<(String, f64)>) -> Self {
        Self(pairs)
    }

    pub fn get(&self, target: &str) -> Option<f64> {
        self.0.iter().find(|(t, _)| t == target).map(|(_, s)| *s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(t, s)| (t.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The backend contract. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn capability(&self) -> BackendCapability;

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError>;

    fn generate(&self, prompt: &PromptText, max_new_tokens: usize) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capability(&self) -> BackendCapability {
        (**self).capability()
    }

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
        (**self).score_targets(prompt, targets)
    }

    fn generate(&self, prompt: &PromptText, max_new_tokens: usize) -> Result<String, BackendError> {
        (**self).generate(prompt, max_new_tokens)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capability(&self) -> BackendCapability {
        (**self).capability()
    }

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
        (**self).score_targets(prompt, targets)
    }

    fn generate(&self, prompt: &PromptText, max_new_tokens: usize) -> Result<String, BackendError> {
        (**self).generate(prompt, max_new_tokens)
    }
}

pub(crate) fn require<B: Backend + ?Sized>(backend: &B, mode: Mode) -> Result<(), BackendError> {
    if backend.capability().supports(mode) {
        Ok(())
    } else {
        Err(BackendError::CapabilityMissing {
            backend: backend.name().to_string(),
            capability: match mode {
                Mode::Scoring => "scoring",
                Mode::Generation => "generation",
            },
        })
    }
}
