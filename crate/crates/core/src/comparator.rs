//! The pairwise comparison unit and its swapped-order consistency rule.

use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{require, Backend, Mode};
use crate::cache::{JudgmentCache, JudgmentKey, PairwiseJudgment};
use crate::error::BackendError;
use crate::model::{Passage, Preference, Provenance, Query};
use crate::prompt::{parse_pairwise_generation, ParsedChoice, PromptTemplates, TARGET_PASSAGE_A, TARGET_PASSAGE_B};

/// Whether each pair is prompted in both orders or only once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prompting {
    /// `u(q, d1, d2)` and `u(q, d2, d1)`; only agreeing answers count.
    #[default]
    Both,
    /// `u(q, d1, d2)` only; an unparseable answer is ambiguous.
    Single,
}

/// Result of one pair comparison, with the cost it incurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Judged {
    pub preference: Preference,
    /// Directional prompts sent to the backend.
    pub unit_calls: u64,
    /// Directional prompts answered from the cache.
    pub cache_hits: u64,
}

/// Anything that can order two passages for a query. Ranking strategies are
/// written against this trait.
pub trait PairJudge: Sync {
    fn judge(&self, query: &Query, first: &Passage, second: &Passage) -> Result<Judged, BackendError>;

    /// Provenance stamped onto rankings produced with this judge.
    fn provenance(&self, strategy: &str) -> Provenance;
}

/// Combines the answers of `u(q, d1, d2)` and `u(q, d2, d1)`.
pub fn combine(forward: ParsedChoice, backward: ParsedChoice) -> Preference {
    match (forward, backward) {
        (ParsedChoice::ChoseA, ParsedChoice::ChoseB) => Preference::FirstWins,
        (ParsedChoice::ChoseB, ParsedChoice::ChoseA) => Preference::SecondWins,
        _ => Preference::Ambiguous,
    }
}

/// Winner by raw log-likelihood. Exact ties (and NaN) are "not sure".
pub fn choice_from_scores(score_a: f64, score_b: f64) -> ParsedChoice {
    if score_a > score_b {
        ParsedChoice::ChoseA
    } else if score_a < score_b {
        ParsedChoice::ChoseB
    } else {
        ParsedChoice::Unparseable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparatorConfig {
    pub mode: Mode,
    pub prompting: Prompting,
    pub truncate_chars: usize,
    pub max_new_tokens: usize,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Scoring,
            prompting: Prompting::Both,
            truncate_chars: 1_000,
            max_new_tokens: 8,
        }
    }
}

/// One directional answer and whether it cost a backend call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitOutcome {
    pub choice: ParsedChoice,
    pub cached: bool,
}

/// Prompts a [`Backend`] with the pairwise template.
pub struct PairwiseComparator<B> {
    backend: B,
    templates: PromptTemplates,
    config: ComparatorConfig,
    cache: Option<Arc<JudgmentCache>>,
    config_hash: String,
}

impl<B: Backend> PairwiseComparator<B> {
    pub fn new(backend: B, config: ComparatorConfig) -> Result<Self, BackendError> {
        require(&backend, config.mode)?;
        let mut this = Self {
            backend,
            templates: PromptTemplates::default(),
            config,
            cache: None,
            config_hash: String::new(),
        };
        this.config_hash = this.default_config_hash();
        Ok(this)
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Self {
        self.templates = templates;
        self.config_hash = self.default_config_hash();
        self
    }

    pub fn with_cache(mut self, cache: Arc<JudgmentCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Replaces the provenance hash, e.g. with a hash of the whole experiment config.
    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn config(&self) -> &ComparatorConfig {
        &self.config
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn default_config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.backend.name().as_bytes());
        h.update([0]);
        h.update(self.templates.hash().as_bytes());
        h.update(
            format!(
                "\0{}\0{:?}\0{}\0{}",
                self.config.mode.as_str(),
                self.config.prompting,
                self.config.truncate_chars,
                self.config.max_new_tokens
            )
            .as_bytes(),
        );
        hex::encode(h.finalize())[..12].to_string()
    }

    /// `u(q, d1, d2)`: one prompt with `d1` in slot A and `d2` in slot B.
    pub fn compare_unit(&self, q: &Query, d1: &Passage, d2: &Passage) -> Result<UnitOutcome, BackendError> {
        let key = self.cache.as_ref().map(|_| JudgmentKey {
            backend: self.backend.name().to_string(),
            template_hash: self.templates.hash().to_string(),
            mode: self.config.mode,
            query_id: q.id().to_string(),
            first_id: d1.id().to_string(),
            second_id: d2.id().to_string(),
        });
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.lookup(key) {
                return Ok(UnitOutcome {
                    choice: hit.choice,
                    cached: true,
                });
            }
        }

        let prompt = self.templates.render_pairwise(q, d1, d2, self.config.truncate_chars)?;
        let (choice, scores, raw_text) = match self.config.mode {
            Mode::Scoring => {
                let scored = self.backend.score_targets(&prompt, &[TARGET_PASSAGE_A, TARGET_PASSAGE_B])?;
                let get = |t: &str| {
                    scored
                        .get(t)
                        .ok_or_else(|| BackendError::Protocol(format!("no score returned for target {t:?}")))
                };
                let (a, b) = (get(TARGET_PASSAGE_A)?, get(TARGET_PASSAGE_B)?);
                (choice_from_scores(a, b), Some([a, b]), None)
            }
            Mode::Generation => {
                let text = self.backend.generate(&prompt, self.config.max_new_tokens)?;
                (parse_pairwise_generation(&text), None, Some(text))
            }
        };

        if let (Some(cache), Some(key)) = (&self.cache, key) {
            if let Err(e) = cache.store(PairwiseJudgment::new(key, choice, scores, raw_text)) {
                warn!("judgment cache write failed: {e}");
            }
        }
        Ok(UnitOutcome { choice, cached: false })
    }

    /// Compares `d1` against `d2`, prompting in both orders unless
    /// configured for single-direction prompting.
    pub fn compare_pair(&self, q: &Query, d1: &Passage, d2: &Passage) -> Result<Judged, BackendError> {
        let forward = self.compare_unit(q, d1, d2)?;
        let mut judged = Judged {
            preference: Preference::Ambiguous,
            unit_calls: 0,
            cache_hits: 0,
        };
        let mut tally = |u: &UnitOutcome| {
            if u.cached {
                judged.cache_hits += 1;
            } else {
                judged.unit_calls += 1;
            }
        };
        tally(&forward);
        let preference = match self.config.prompting {
            Prompting::Single => match forward.choice {
                ParsedChoice::ChoseA => Preference::FirstWins,
                ParsedChoice::ChoseB => Preference::SecondWins,
                ParsedChoice::Unparseable => Preference::Ambiguous,
            },
            Prompting::Both => {
                let backward = self.compare_unit(q, d2, d1)?;
                tally(&backward);
                combine(forward.choice, backward.choice)
            }
        };
        judged.preference = preference;
        Ok(judged)
    }
}

impl<B: Backend> PairJudge for PairwiseComparator<B> {
    fn judge(&self, query: &Query, first: &Passage, second: &Passage) -> Result<Judged, BackendError> {
        self.compare_pair(query, first, second)
    }

    fn provenance(&self, strategy: &str) -> Provenance {
        Provenance {
            strategy: strategy.to_string(),
            backend: self.backend.name().to_string(),
            config_hash: self.config_hash.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendCapability, OracleBackend, ScoredTargets};
    use crate::metrics::QrelSet;
    use crate::prompt::PromptText;
    use std::sync::Mutex;

    /// Replays canned answers and records prompts.
    struct Scripted {
        scores: Mutex<Vec<(f64, f64)>>,
        texts: Mutex<Vec<&'static str>>,
        seen: Mutex<Vec<Vec<String>>>,
        capability: BackendCapability,
    }

    impl Scripted {
        fn scores(s: &[(f64, f64)]) -> Self {
            Self {
                scores: Mutex::new(s.iter().rev().copied().collect()),
                texts: Mutex::new(vec![]),
                seen: Mutex::new(vec![]),
                capability: BackendCapability::BOTH,
            }
        }

        fn texts(t: &[&'static str]) -> Self {
            Self {
                scores: Mutex::new(vec![]),
                texts: Mutex::new(t.iter().rev().copied().collect()),
                seen: Mutex::new(vec![]),
                capability: BackendCapability::BOTH,
            }
        }
    }

    impl Backend for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn capability(&self) -> BackendCapability {
            self.capability
        }
        fn score_targets(&self, p: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
            self.seen.lock().unwrap().push(p.subject.passage_ids.clone());
            let (a, b) = self.scores.lock().unwrap().pop().expect("script exhausted");
            Ok(ScoredTargets::new(vec![(targets[0].into(), a), (targets[1].into(), b)]))
        }
        fn generate(&self, p: &PromptText, _: usize) -> Result<String, BackendError> {
            self.seen.lock().unwrap().push(p.subject.passage_ids.clone());
            Ok(self.texts.lock().unwrap().pop().expect("script exhausted").to_string())
        }
    }

    fn q() -> Query {
        Query::new("q", "what is reba mcentire's net worth").unwrap()
    }

    fn p(id: &str) -> Passage {
        Passage::new(id, format!("text of {id}")).unwrap()
    }

    fn generation() -> ComparatorConfig {
        ComparatorConfig {
            mode: Mode::Generation,
            ..Default::default()
        }
    }

    #[test]
    fn scoring_unit_uses_raw_loglik() {
        let c = PairwiseComparator::new(Scripted::scores(&[(-0.0012, -6.9116), (-1.0, -1.0), (-3.0, -0.5)]), Default::default()).unwrap();
        assert_eq!(c.compare_unit(&q(), &p("a"), &p("b")).unwrap().choice, ParsedChoice::ChoseA);
        assert_eq!(c.compare_unit(&q(), &p("a"), &p("b")).unwrap().choice, ParsedChoice::Unparseable);
        assert_eq!(c.compare_unit(&q(), &p("a"), &p("b")).unwrap().choice, ParsedChoice::ChoseB);
    }

    #[test]
    fn generation_unit_parses() {
        let c = PairwiseComparator::new(Scripted::texts(&["passage b", "Passage A", "no idea"]), generation()).unwrap();
        assert_eq!(c.compare_unit(&q(), &p("a"), &p("b")).unwrap().choice, ParsedChoice::ChoseB);
        assert_eq!(c.compare_unit(&q(), &p("a"), &p("b")).unwrap().choice, ParsedChoice::ChoseA);
        assert_eq!(c.compare_unit(&q(), &p("a"), &p("b")).unwrap().choice, ParsedChoice::Unparseable);
    }

    #[test]
    fn combine_truth_table() {
        use ParsedChoice::*;
        use Preference::*;
        let table = [
            (ChoseA, ChoseB, FirstWins),
            (ChoseB, ChoseA, SecondWins),
            (ChoseA, ChoseA, Ambiguous),
            (ChoseB, ChoseB, Ambiguous),
            (Unparseable, ChoseB, Ambiguous),
            (ChoseA, Unparseable, Ambiguous),
            (Unparseable, Unparseable, Ambiguous),
        ];
        for (f, b, want) in table {
            assert_eq!(combine(f, b), want, "{f:?} {b:?}");
        }
    }

    #[test]
    fn pair_prompts_both_orders() {
        let backend = Scripted::texts(&["Passage A", "Passage B"]);
        let c = PairwiseComparator::new(backend, generation()).unwrap();
        let j = c.compare_pair(&q(), &p("x"), &p("y")).unwrap();
        assert_eq!(j.preference, Preference::FirstWins);
        assert_eq!(j.unit_calls, 2);
        assert_eq!(*c.backend().seen.lock().unwrap(), vec![vec!["x", "y"], vec!["y", "x"]]);
    }

    #[test]
    fn positional_bias_is_ambiguous() {
        let c = PairwiseComparator::new(Scripted::texts(&["Passage A", "Passage A"]), generation()).unwrap();
        assert_eq!(c.compare_pair(&q(), &p("x"), &p("y")).unwrap().preference, Preference::Ambiguous);
    }

    #[test]
    fn single_direction_mode() {
        let cfg = ComparatorConfig {
            prompting: Prompting::Single,
            ..generation()
        };
        let c = PairwiseComparator::new(Scripted::texts(&["Passage B"]), cfg).unwrap();
        let j = c.compare_pair(&q(), &p("x"), &p("y")).unwrap();
        assert_eq!(j.preference, Preference::SecondWins);
        assert_eq!(j.unit_calls, 1);
    }

    #[test]
    fn capability_is_checked() {
        let mut s = Scripted::texts(&[]);
        s.capability = BackendCapability {
            supports_scoring: false,
            supports_generation: true,
        };
        assert!(matches!(
            PairwiseComparator::new(s, ComparatorConfig::default()),
            Err(BackendError::CapabilityMissing { .. })
        ));
    }

    #[test]
    fn oracle_truth_table_both_modes() {
        let qrels = QrelSet::from_triples([("q", "d1", 3), ("q", "d2", 1), ("q", "d3", 1)]).unwrap();
        for mode in [Mode::Scoring, Mode::Generation] {
            let cfg = ComparatorConfig {
                mode,
                ..Default::default()
            };
            let c = PairwiseComparator::new(OracleBackend::new(qrels.clone()), cfg).unwrap();
            assert_eq!(c.compare_pair(&q(), &p("d1"), &p("d2")).unwrap().preference, Preference::FirstWins);
            assert_eq!(c.compare_pair(&q(), &p("d2"), &p("d1")).unwrap().preference, Preference::SecondWins);
            assert_eq!(c.compare_pair(&q(), &p("d2"), &p("d3")).unwrap().preference, Preference::Ambiguous);
        }
    }

    #[test]
    fn cache_hits_skip_backend() {
        let qrels = QrelSet::from_triples([("q", "d1", 3), ("q", "d2", 1)]).unwrap();
        let cache = Arc::new(JudgmentCache::in_memory());
        let c = PairwiseComparator::new(OracleBackend::new(qrels), Default::default())
            .unwrap()
            .with_cache(cache.clone());
        let first = c.compare_pair(&q(), &p("d1"), &p("d2")).unwrap();
        assert_eq!((first.unit_calls, first.cache_hits), (2, 0));
        let again = c.compare_pair(&q(), &p("d1"), &p("d2")).unwrap();
        assert_eq!((again.unit_calls, again.cache_hits), (0, 2));
        assert_eq!(again.preference, first.preference);
        // the reversed pair reuses both directional entries
        let rev = c.compare_pair(&q(), &p("d2"), &p("d1")).unwrap();
        assert_eq!((rev.unit_calls, rev.cache_hits), (0, 2));
        assert_eq!(rev.preference, Preference::SecondWins);
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn config_hash_tracks_templates_and_mode() {
        let qrels = QrelSet::new();
        let a = PairwiseComparator::new(OracleBackend::new(qrels.clone()), Default::default()).unwrap();
        let b = PairwiseComparator::new(OracleBackend::new(qrels.clone()), generation()).unwrap();
        let c = PairwiseComparator::new(OracleBackend::new(qrels), Default::default())
            .unwrap()
            .with_templates(PromptTemplates::custom("{query}|{passage_a}|{passage_b}", "{query}|{passage}").unwrap());
        assert_ne!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.provenance("allpair").backend, "oracle");
    }
}
