//! Graded-relevance NDCG@k.
//!
//! Gain is `2^grade - 1`, discount `log2(rank + 1)`, and the ideal ordering
//! is taken over every judged passage of the query. Unjudged passages in a
//! run count as grade 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;

use crate::error::InputError;
use crate::model::{Ranking, RelevanceGrade};

/// Relevance labels keyed by query then passage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelSet {
    by_query: BTreeMap<String, BTreeMap<String, RelevanceGrade>>,
}

impl QrelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and leaves the set unchanged) if the pair is already labelled.
    pub fn insert(&mut self, query_id: impl Into<String>, passage_id: impl Into<String>, grade: RelevanceGrade) -> bool {
        let docs = self.by_query.entry(query_id.into()).or_default();
        match docs.entry(passage_id.into()) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(grade);
                true
            }
        }
    }

    pub fn from_triples<Q, P>(triples: impl IntoIterator<Item = (Q, P, RelevanceGrade)>) -> Result<Self, InputError>
    where
        Q: Into<String>,
        P: Into<String>,
    {
        let mut set = Self::new();
        for (q, p, g) in triples {
            let (q, p) = (q.into(), p.into());
            if !set.insert(q.clone(), p.clone(), g) {
                return Err(InputError::DuplicatePassage {
                    query_id: q,
                    passage_id: p,
                });
            }
        }
        Ok(set)
    }

    pub fn grade(&self, query_id: &str, passage_id: &str) -> Option<RelevanceGrade> {
        self.by_query.get(query_id)?.get(passage_id).copied()
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.by_query.contains_key(query_id)
    }

    /// All grades judged for a query, in no particular order.
    pub fn judged_grades(&self, query_id: &str) -> Vec<RelevanceGrade> {
        self.by_query
            .get(query_id)
            .map(|d| d.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(String::as_str)
    }

    /// (query, passage, grade) triples in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, RelevanceGrade)> {
        self.by_query
            .iter()
            .flat_map(|(q, docs)| docs.iter().map(move |(d, g)| (q.as_str(), d.as_str(), *g)))
    }

    pub fn len(&self) -> usize {
        self.by_query.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn gain(grade: RelevanceGrade) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

pub fn dcg_at_k(grades: &[RelevanceGrade], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k of `run_grades` (grades in run order) against every judged grade
/// of the query. Zero when the ideal DCG is zero.
pub fn ndcg_at_k(run_grades: &[RelevanceGrade], judged: &[RelevanceGrade], k: usize) -> f64 {
    let mut ideal = judged.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg == 0.0 {
        return 0.0;
    }
    dcg_at_k(run_grades, k) / idcg
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryMetrics {
    pub query_id: String,
    /// One value per requested cutoff, aligned with [`MetricReport::ks`].
    pub ndcg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub per_query: Vec<QueryMetrics>,
    /// Arithmetic mean over evaluated queries, aligned with `ks`.
    pub mean: Vec<f64>,
    /// Run queries with no relevance labels.
    pub skipped: Vec<String>,
}

impl MetricReport {
    pub fn metric_names(&self) -> Vec<String> {
        self.ks.iter().map(|k| format!("ndcg@{k}")).collect()
    }

    /// Mean for one cutoff, if it was requested.
    pub fn mean_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean[i])
    }

    /// Tab-separated table: header, one row per query, then an `all` row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("query");
        for name in self.metric_names() {
            out.push('\t');
            out.push_str(&name);
        }
        out.push('\n');
        let mut row = |label: &str, values: &[f64]| {
            out.push_str(label);
            for v in values {
                let _ = write!(out, "\t{v:.4}");
            }
            out.push('\n');
        };
        for q in &self.per_query {
            row(&q.query_id, &q.ndcg);
        }
        row("all", &self.mean);
        out
    }
}

pub fn evaluate_run(run: &[Ranking], qrels: &QrelSet, ks: &[usize]) -> MetricReport {
    let mut per_query = Vec::new();
    let mut skipped = Vec::new();
    for r in run {
        if !qrels.contains_query(&r.query_id) {
            warn!("query `{}` has no relevance labels; skipped", r.query_id);
            skipped.push(r.query_id.clone());
            continue;
        }
        let grades: Vec<_> = r
            .ordered_passage_ids
            .iter()
            .map(|p| qrels.grade(&r.query_id, p).unwrap_or(0))
            .collect();
        let judged = qrels.judged_grades(&r.query_id);
        per_query.push(QueryMetrics {
            query_id: r.query_id.clone(),
            ndcg: ks.iter().map(|&k| ndcg_at_k(&grades, &judged, k)).collect(),
        });
    }
    let mean = (0..ks.len())
        .map(|i| {
            if per_query.is_empty() {
                0.0
            } else {
                per_query.iter().map(|q| q.ndcg[i]).sum::<f64>() / per_query.len() as f64
            }
        })
        .collect();
    MetricReport {
        ks: ks.to_vec(),
        per_query,
        mean,
        skipped,
    }
}
