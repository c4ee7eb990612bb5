//! Core domain types: queries, passages, candidate lists and rankings.
//!
//! Every value here is immutable once built. The position of a passage in
//! its [`CandidateList`] is its *initial rank* and is the tiebreaker used by
//! every ranking strategy.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::InputError;

/// Default cap on candidate list length (first-stage top-100).
pub const DEFAULT_MAX_CANDIDATES: usize = 100;

/// Graded relevance label, TREC style (0..=3 in practice).
pub type RelevanceGrade = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    id: String,
    text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, InputError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(InputError::EmptyId("query"));
        }
        if text.trim().is_empty() {
            return Err(InputError::EmptyText {
                what: "query",
                id,
            });
        }
        Ok(Self { id, text })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Passage {
    id: String,
    text: String,
}

impl Passage {
    /// Builds a passage. Empty text is allowed here; prompt rendering rejects it.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, InputError> {
        let id = id.into();
        if id.is_empty() {
            return Err(InputError::EmptyId("passage"));
        }
        Ok(Self {
            id,
            text: text.into(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// One first-stage candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub passage_id: String,
    pub score: f64,
}

/// A query's first-stage ranking: passage ids in initial order.
///
/// Scores are non-increasing along the list unless `score_order_decoupled`
/// is set (after [`invert_candidates`], or when a lenient parse accepted a
/// run with ordering violations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    query_id: String,
    entries: Vec<CandidateEntry>,
    score_order_decoupled: bool,
}

impl CandidateList {
    pub fn new(query_id: impl Into<String>, entries: Vec<CandidateEntry>) -> Result<Self, InputError> {
        Self::build(query_id.into(), entries, false, DEFAULT_MAX_CANDIDATES)
    }

    /// Like [`CandidateList::new`] with an explicit length cap.
    pub fn with_limit(
        query_id: impl Into<String>,
        entries: Vec<CandidateEntry>,
        max_len: usize,
    ) -> Result<Self, InputError> {
        Self::build(query_id.into(), entries, false, max_len)
    }

    /// Builds a list whose scores are not required to be monotone.
    pub fn decoupled(query_id: impl Into<String>, entries: Vec<CandidateEntry>) -> Result<Self, InputError> {
        Self::build(query_id.into(), entries, true, usize::MAX)
    }

    fn build(
        query_id: String,
        entries: Vec<CandidateEntry>,
        score_order_decoupled: bool,
        max_len: usize,
    ) -> Result<Self, InputError> {
        if query_id.is_empty() {
            return Err(InputError::EmptyId("query"));
        }
        if entries.len() > max_len {
            return Err(InputError::TooManyCandidates {
                query_id,
                len: entries.len(),
                max: max_len,
            });
        }
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.passage_id.is_empty() {
                return Err(InputError::EmptyId("passage"));
            }
            if !seen.insert(e.passage_id.as_str()) {
                return Err(InputError::DuplicatePassage {
                    query_id,
                    passage_id: e.passage_id.clone(),
                });
            }
        }
        if !score_order_decoupled {
            if let Some(w) = entries.windows(2).position(|w| w[1].score > w[0].score) {
                return Err(InputError::ScoreOrder {
                    query_id,
                    position: w + 1,
                });
            }
        }
        Ok(Self {
            query_id,
            entries,
            score_order_decoupled,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn entries(&self) -> &[CandidateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_score_order_decoupled(&self) -> bool {
        self.score_order_decoupled
    }

    pub fn passage_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.passage_id.as_str())
    }
}

/// Where a ranking came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub strategy: String,
    pub backend: String,
    pub config_hash: String,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.strategy, self.backend, self.config_hash)
    }
}

/// A reranked list. Always a permutation of the candidates it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub ordered_passage_ids: Vec<String>,
    pub provenance: Provenance,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.ordered_passage_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered_passage_ids.is_empty()
    }

    /// True when the ranking holds exactly the given ids, each once.
    pub fn is_permutation_of<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> bool {
        let mut counts: HashMap<&str, i64> = HashMap::new();
        for id in ids {
            *counts.entry(id).or_default() += 1;
        }
        for id in &self.ordered_passage_ids {
            *counts.entry(id.as_str()).or_default() -= 1;
        }
        counts.values().all(|&c| c == 0)
    }
}

/// Outcome of a double-prompted pairwise comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preference {
    FirstWins,
    SecondWins,
    /// Conflicting swapped-order answers, or at least one unparseable answer.
    Ambiguous,
}

impl Preference {
    /// The same outcome seen from the other side of the pair.
    pub fn reversed(self) -> Self {
        match self {
            Preference::FirstWins => Preference::SecondWins,
            Preference::SecondWins => Preference::FirstWins,
            Preference::Ambiguous => Preference::Ambiguous,
        }
    }
}

/// Reverses the initial order. The result is flagged score-order-decoupled.
pub fn invert_candidates(c: &CandidateList) -> CandidateList {
    let mut entries = c.entries.clone();
    entries.reverse();
    CandidateList {
        query_id: c.query_id.clone(),
        entries,
        score_order_decoupled: true,
    }
}

/// One line's worth of run-file data for a ranked passage.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedScore {
    pub passage_id: String,
    pub rank: usize,
    pub score: f64,
}

/// Assigns 1-based ranks and synthetic scores `N - rank + 1`.
pub fn ranks_to_run_scores(r: &Ranking) -> Vec<RankedScore> {
    let n = r.ordered_passage_ids.len();
    r.ordered_passage_ids
        .iter()
        .enumerate()
        .map(|(i, id)| RankedScore {
            passage_id: id.clone(),
            rank: i + 1,
            score: (n - i) as f64,
        })
        .collect()
}
