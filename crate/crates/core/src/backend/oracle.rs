use std::collections::HashMap;

use crate::error::BackendError;
use crate::metrics::QrelSet;
use crate::model::RelevanceGrade;
use crate::prompt::{parse_pairwise_generation, ParsedChoice, PromptKind, PromptText};

use super::{Backend, BackendCapability, ScoredTargets};

/// Answers from relevance labels instead of a model.
///
/// Pairwise prompts score the better slot 0 and the other −∞; equal grades
/// score both 0, which the comparator reads as "not sure". Pointwise prompts
/// report `p(Yes) = (grade + 1) / (max_grade + 1)` for the query, so the
/// relevance-generation score is strictly increasing in grade.
/// Unjudged passages count as grade 0.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    qrels: QrelSet,
    max_grade: HashMap<String, RelevanceGrade>,
}

pub(crate) enum Verdict {
    A,
    B,
    Tie,
}

impl OracleBackend {
    pub fn new(qrels: QrelSet) -> Self {
        let mut max_grade: HashMap<String, RelevanceGrade> = HashMap::new();
        for (qid, _, g) in qrels.iter() {
            let m = max_grade.entry(qid.to_string()).or_default();
            *m = (*m).max(g);
        }
        Self { qrels, max_grade }
    }

    pub fn grade(&self, query_id: &str, passage_id: &str) -> RelevanceGrade {
        self.qrels.grade(query_id, passage_id).unwrap_or(0)
    }

    pub(crate) fn pairwise_verdict(&self, prompt: &PromptText) -> Result<Verdict, BackendError> {
        let (a, b) = match (prompt.kind, prompt.subject.passage_ids.as_slice()) {
            (PromptKind::PairwiseAB, [a, b]) => (a, b),
            _ => return Err(BackendError::Protocol("expected a pairwise prompt with two passages".into())),
        };
        let qid = &prompt.subject.query_id;
        let (ga, gb) = (self.grade(qid, a), self.grade(qid, b));
        Ok(match ga.cmp(&gb) {
            std::cmp::Ordering::Greater => Verdict::A,
            std::cmp::Ordering::Less => Verdict::B,
            std::cmp::Ordering::Equal => Verdict::Tie,
        })
    }

    /// Probability of "Yes" for a pointwise prompt.
    pub(crate) fn p_yes(&self, prompt: &PromptText) -> Result<f64, BackendError> {
        let p = match (prompt.kind, prompt.subject.passage_ids.as_slice()) {
            (PromptKind::PointwiseRG, [p]) => p,
            _ => return Err(BackendError::Protocol("expected a pointwise prompt with one passage".into())),
        };
        let qid = &prompt.subject.query_id;
        let max = self.max_grade.get(qid).copied().unwrap_or(0) as f64;
        Ok((self.grade(qid, p) as f64 + 1.0) / (max + 1.0))
    }
}

pub(crate) fn pairwise_scores(verdict: &Verdict, targets: &[&str]) -> ScoredTargets {
    let (sa, sb) = match verdict {
        Verdict::A => (0.0, f64::NEG_INFINITY),
        Verdict::B => (f64::NEG_INFINITY, 0.0),
        Verdict::Tie => (0.0, 0.0),
    };
    ScoredTargets::new(
        targets
            .iter()
            .map(|t| {
                let s = match parse_pairwise_generation(t) {
                    ParsedChoice::ChoseA => sa,
                    ParsedChoice::ChoseB => sb,
                    ParsedChoice::Unparseable => f64::NEG_INFINITY,
                };
                (t.to_string(), s)
            })
            .collect(),
    )
}

pub(crate) fn pointwise_scores(p_yes: f64, targets: &[&str]) -> ScoredTargets {
    ScoredTargets::new(
        targets
            .iter()
            .map(|t| {
                let s = match t.trim().to_ascii_lowercase().as_str() {
                    "yes" => p_yes.ln(),
                    "no" => (1.0 - p_yes).ln(),
                    _ => f64::NEG_INFINITY,
                };
                (t.to_string(), s)
            })
            .collect(),
    )
}

pub(crate) fn verdict_text(verdict: &Verdict) -> &'static str {
    match verdict {
        Verdict::A => "Passage A",
        Verdict::B => "Passage B",
        Verdict::Tie => super::UNDECIDED_TEXT,
    }
}

impl Backend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability::BOTH
    }

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
        if targets.is_empty() {
            return Err(BackendError::Protocol("no targets to score".into()));
        }
        match prompt.kind {
            PromptKind::PairwiseAB => Ok(pairwise_scores(&self.pairwise_verdict(prompt)?, targets)),
            PromptKind::PointwiseRG => Ok(pointwise_scores(self.p_yes(prompt)?, targets)),
        }
    }

    fn generate(&self, prompt: &PromptText, _max_new_tokens: usize) -> Result<String, BackendError> {
        match prompt.kind {
            PromptKind::PairwiseAB => Ok(verdict_text(&self.pairwise_verdict(prompt)?).to_string()),
            PromptKind::PointwiseRG => Ok(if self.p_yes(prompt)? >= 0.5 { "Yes" } else { "No" }.to_string()),
        }
    }
}
