//! Zero-shot passage reranking with pairwise ranking prompts.
//!
//! A language model is asked which of two passages better answers a query.
//! [`comparator::PairwiseComparator`] turns that question into a
//! [`model::Preference`], prompting in both orders so that position bias
//! shows up as ambiguity instead of a wrong answer. The strategies in
//! [`strategy`] build full rankings from those comparisons, [`pointwise`]
//! provides a single-passage baseline, and [`metrics`] scores the result
//! with NDCG.
//!
//! Backends are pluggable: an HTTP client for a real model server, an
//! oracle that answers from relevance judgments, and a noisy oracle for
//! simulation.

pub mod backend;
pub mod cache;
pub mod comparator;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pointwise;
pub mod prompt;
pub mod strategy;

pub use backend::{Backend, BackendCapability, Mode};
pub use comparator::{ComparatorConfig, PairJudge, PairwiseComparator, Prompting};
pub use config::{ExperimentConfig, StrategyKind};
pub use error::{BackendError, FormatError, InputError, RankError};
pub use metrics::{ndcg_at_k, QrelSet};
pub use model::{CandidateList, Passage, Preference, Query, Ranking};
pub use strategy::{CallCounter, Direction};
