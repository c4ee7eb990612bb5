//! Ranking strategies built on pairwise comparisons.
//!
//! All strategies take the candidates in their initial order; a passage's
//! index in that slice is its initial rank and breaks every tie. Any
//! comparator error aborts the whole query.

mod allpair;
mod heapsort;
mod sliding;

use std::ops::AddAssign;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

pub use allpair::{allpair_scores, rank_allpair, AllpairScore};
pub use heapsort::rank_heapsort;
pub use sliding::{rank_sliding_k, sliding_pass};

use crate::comparator::Judged;
use crate::model::{Passage, Ranking};

/// Cost accounting for one strategy run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounter {
    /// Directional prompts sent to the backend.
    pub unit_calls: u64,
    /// Pair comparisons requested by the strategy.
    pub pair_comparisons: u64,
    /// Directional prompts answered from the cache.
    pub cache_hits: u64,
}

impl CallCounter {
    pub fn record(&mut self, j: &Judged) {
        self.pair_comparisons += 1;
        self.unit_calls += j.unit_calls;
        self.cache_hits += j.cache_hits;
    }
}

impl AddAssign for CallCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.unit_calls += rhs.unit_calls;
        self.pair_comparisons += rhs.pair_comparisons;
        self.cache_hits += rhs.cache_hits;
    }
}

/// Sweep direction of a sliding pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Bottom of the list to the top; carries winners upward.
    Backward,
    /// Top to bottom; carries losers downward.
    Forward,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Backward => "backward",
            Direction::Forward => "forward",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "backward" => Ok(Direction::Backward),
            "forward" => Ok(Direction::Forward),
            other => Err(format!("unknown direction `{other}` (expected backward or forward)")),
        }
    }
}

pub(crate) fn ranking_from_order(
    query_id: &str,
    candidates: &[Passage],
    order: &[usize],
    provenance: crate::model::Provenance,
) -> Ranking {
    Ranking {
        query_id: query_id.to_string(),
        ordered_passage_ids: order.iter().map(|&i| candidates[i].id().to_string()).collect(),
        provenance,
    }
}

/// Maps `f` over `items` on at most `limit` threads, preserving order.
/// Stops handing out work after the first error.
pub(crate) fn bounded_map<T, R, E, F>(items: &[T], limit: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let workers = limit.min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let mut slots: Vec<Option<Result<R, E>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    while !failed.load(Ordering::Relaxed) {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break;
                        }
                        let r = f(&items[i]);
                        if r.is_err() {
                            failed.store(true, Ordering::Relaxed);
                        }
                        done.push((i, r));
                    }
                    done
                })
            })
            .collect();
        let mut slots: Vec<Option<Result<R, E>>> = (0..items.len()).map(|_| None).collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
        slots
    });
    if let Some(pos) = slots.iter().position(|s| matches!(s, Some(Err(_)))) {
        return match slots.swap_remove(pos) {
            Some(Err(e)) => Err(e),
            _ => unreachable!(),
        };
    }
    Ok(slots.into_iter().map(|s| match s {
        Some(Ok(r)) => r,
        _ => unreachable!("every slot is filled when no worker failed"),
    }).collect())
}
