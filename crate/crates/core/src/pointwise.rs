//! Pointwise relevance-generation baseline.
//!
//! Each passage is scored alone from the likelihoods of "Yes" and "No":
//! `1 + p(Yes)` when Yes wins (ties go to Yes), `1 - p(No)` otherwise.
//! Probabilities are the exponentiated target log-likelihoods, not
//! renormalized.

use crate::backend::{require, Backend, Mode};
use crate::error::{BackendError, RankError};
use crate::model::{Passage, Provenance, Query, Ranking};
use crate::prompt::{PromptTemplates, TARGET_NO, TARGET_YES};
use crate::strategy::{bounded_map, ranking_from_order, CallCounter};

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseScore {
    pub passage_id: String,
    /// In `[1, 2]` when Yes won, `[0, 1]` when No won.
    pub score: f64,
}

/// Applies the relevance-generation formula to two target log-likelihoods.
pub fn rg_from_logliks(loglik_yes: f64, loglik_no: f64) -> f64 {
    if loglik_yes >= loglik_no {
        1.0 + loglik_yes.exp()
    } else {
        1.0 - loglik_no.exp()
    }
}

pub fn rg_score<B: Backend + ?Sized>(
    q: &Query,
    p: &Passage,
    backend: &B,
    templates: &PromptTemplates,
    truncate_chars: usize,
) -> Result<PointwiseScore, BackendError> {
    let prompt = templates.render_pointwise_rg(q, p, truncate_chars)?;
    let scored = backend.score_targets(&prompt, &[TARGET_YES, TARGET_NO])?;
    let get = |t: &str| {
        scored
            .get(t)
            .ok_or_else(|| BackendError::Protocol(format!("no score returned for target {t:?}")))
    };
    Ok(PointwiseScore {
        passage_id: p.id().to_string(),
        score: rg_from_logliks(get(TARGET_YES)?, get(TARGET_NO)?),
    })
}

/// Scores every passage (one scoring call each) and sorts by score,
/// ties keeping initial order.
pub fn rank_pointwise<B: Backend + ?Sized>(
    q: &Query,
    candidates: &[Passage],
    backend: &B,
    templates: &PromptTemplates,
    truncate_chars: usize,
    max_inflight: usize,
) -> Result<(Ranking, CallCounter), RankError> {
    if candidates.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    require(backend, Mode::Scoring)?;
    let scores = bounded_map(candidates, max_inflight, |p| rg_score(q, p, backend, templates, truncate_chars))?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].score.total_cmp(&scores[a].score).then(a.cmp(&b)));
    let provenance = Provenance {
        strategy: "pointwise-rg".into(),
        backend: backend.name().to_string(),
        config_hash: templates.hash().to_string(),
    };
    let counter = CallCounter {
        unit_calls: candidates.len() as u64,
        pair_comparisons: 0,
        cache_hits: 0,
    };
    Ok((ranking_from_order(q.id(), candidates, &order, provenance), counter))
}
