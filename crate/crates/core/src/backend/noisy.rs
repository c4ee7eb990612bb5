use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BackendError, InputError};
use crate::metrics::QrelSet;
use crate::prompt::{PromptKind, PromptText};

use super::oracle::{pairwise_scores, pointwise_scores, verdict_text, OracleBackend, Verdict};
use super::{Backend, BackendCapability, ScoredTargets};

/// Generated text used when the simulator decides to be off-format.
pub const UNDECIDED_TEXT: &str = "I cannot decide";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub flip_prob: f64,
    pub ambiguity_prob: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(flip_prob: f64, ambiguity_prob: f64, seed: u64) -> Result<Self, InputError> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(flip_prob) || !ok(ambiguity_prob) || flip_prob + ambiguity_prob > 1.0 + 1e-12 {
            return Err(InputError::InvalidParameter(format!(
                "invalid noise: flip_prob={flip_prob}, ambiguity_prob={ambiguity_prob} (each in [0,1], sum <= 1)"
            )));
        }
        Ok(Self {
            flip_prob,
            ambiguity_prob,
            seed,
        })
    }
}

enum Draw {
    Truth,
    Flip,
    Undecided,
}

/// An oracle that lies with a fixed probability.
///
/// Every directional prompt gets one uniform draw keyed on the seed, the
/// prompt kind and the slot ids: below `ambiguity_prob` the answer is
/// off-format (a tie in scoring mode), below `ambiguity_prob + flip_prob`
/// the oracle's answer is inverted, otherwise it is the oracle's. Because the
/// draw depends only on the key, repeated and concurrent calls are
/// reproducible, and sweeping `flip_prob` with a fixed seed yields nested
/// sets of flipped prompts.
#[derive(Debug, Clone)]
pub struct NoisyBackend {
    oracle: OracleBackend,
    noise: NoiseConfig,
    name: String,
}

impl NoisyBackend {
    pub fn new(qrels: QrelSet, noise: NoiseConfig) -> Self {
        Self {
            oracle: OracleBackend::new(qrels),
            name: format!(
                "noisy(flip={},amb={},seed={})",
                noise.flip_prob, noise.ambiguity_prob, noise.seed
            ),
            noise,
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        self.noise
    }

    fn draw(&self, prompt: &PromptText) -> Draw {
        let u: f64 = ChaCha8Rng::seed_from_u64(self.key(prompt)).gen();
        if u < self.noise.ambiguity_prob {
            Draw::Undecided
        } else if u < self.noise.ambiguity_prob + self.noise.flip_prob {
            Draw::Flip
        } else {
            Draw::Truth
        }
    }

    // FNV-1a over the key fields; stable across platforms and releases.
    fn key(&self, prompt: &PromptText) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(PRIME);
            }
            h ^= 0xff;
            h = h.wrapping_mul(PRIME);
        };
        feed(&self.noise.seed.to_le_bytes());
        feed(match prompt.kind {
            PromptKind::PairwiseAB => b"pairwise",
            PromptKind::PointwiseRG => b"pointwise",
        });
        feed(prompt.subject.query_id.as_bytes());
        for id in &prompt.subject.passage_ids {
            feed(id.as_bytes());
        }
        h
    }

    fn noisy_verdict(&self, prompt: &PromptText) -> Result<Verdict, BackendError> {
        let truth = self.oracle.pairwise_verdict(prompt)?;
        Ok(match self.draw(prompt) {
            Draw::Truth => truth,
            Draw::Undecided => Verdict::Tie,
            Draw::Flip => match truth {
                Verdict::A => Verdict::B,
                Verdict::B => Verdict::A,
                Verdict::Tie => Verdict::Tie,
            },
        })
    }

    fn noisy_p_yes(&self, prompt: &PromptText) -> Result<f64, BackendError> {
        let p = self.oracle.p_yes(prompt)?;
        Ok(match self.draw(prompt) {
            Draw::Truth => p,
            Draw::Flip => 1.0 - p,
            Draw::Undecided => 0.5,
        })
    }
}

impl Backend for NoisyBackend {
    /// Includes the noise settings so cached judgments never mix across them.
    fn name(&self) -> &str {
        &self.name
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability::BOTH
    }

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
        if targets.is_empty() {
            return Err(BackendError::Protocol("no targets to score".into()));
        }
        match prompt.kind {
            PromptKind::PairwiseAB => Ok(pairwise_scores(&self.noisy_verdict(prompt)?, targets)),
            PromptKind::PointwiseRG => Ok(pointwise_scores(self.noisy_p_yes(prompt)?, targets)),
        }
    }

    fn generate(&self, prompt: &PromptText, _max_new_tokens: usize) -> Result<String, BackendError> {
        match prompt.kind {
            PromptKind::PairwiseAB => Ok(verdict_text(&self.noisy_verdict(prompt)?).to_string()),
            PromptKind::PointwiseRG => {
                if matches!(self.draw(prompt), Draw::Undecided) {
                    return Ok(UNDECIDED_TEXT.to_string());
                }
                Ok(if self.noisy_p_yes(prompt)? >= 0.5 { "Yes" } else { "No" }.to_string())
            }
        }
    }
}
