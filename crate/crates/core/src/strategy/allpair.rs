use crate::comparator::PairJudge;
use crate::error::RankError;
use crate::model::{Passage, Preference, Query, Ranking};

use super::{bounded_map, ranking_from_order, CallCounter};

/// Aggregated all-pairs score of one passage.
#[derive(Debug, Clone, PartialEq)]
pub struct AllpairScore {
    pub passage_id: String,
    /// One point per consistent win, half a point per ambiguous pair.
    pub score: f64,
    pub initial_rank: usize,
}

/// Compares every unordered pair once and returns per-passage scores in
/// initial order. Pairs may be judged concurrently on up to `max_inflight`
/// threads; the aggregation does not depend on completion order.
pub fn allpair_scores<J: PairJudge + ?Sized>(
    q: &Query,
    candidates: &[Passage],
    judge: &J,
    max_inflight: usize,
) -> Result<(Vec<AllpairScore>, CallCounter), RankError> {
    if candidates.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    let n = candidates.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let outcomes = bounded_map(&pairs, max_inflight, |&(i, j)| judge.judge(q, &candidates[i], &candidates[j]))?;

    let mut points = vec![0.0f64; n];
    let mut counter = CallCounter::default();
    for (&(i, j), judged) in pairs.iter().zip(&outcomes) {
        counter.record(judged);
        match judged.preference {
            Preference::FirstWins => points[i] += 1.0,
            Preference::SecondWins => points[j] += 1.0,
            Preference::Ambiguous => {
                points[i] += 0.5;
                points[j] += 0.5;
            }
        }
    }
    let scores = candidates
        .iter()
        .zip(points)
        .enumerate()
        .map(|(rank, (p, score))| AllpairScore {
            passage_id: p.id().to_string(),
            score,
            initial_rank: rank,
        })
        .collect();
    Ok((scores, counter))
}

/// Ranks by all-pairs score, ties falling back to initial order.
pub fn rank_allpair<J: PairJudge + ?Sized>(
    q: &Query,
    candidates: &[Passage],
    judge: &J,
    max_inflight: usize,
) -> Result<(Ranking, CallCounter), RankError> {
    let (scores, counter) = allpair_scores(q, candidates, judge, max_inflight)?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // points are multiples of 0.5, so float comparison is exact
    order.sort_by(|&a, &b| {
        scores[b]
            .score
            .total_cmp(&scores[a].score)
            .then(scores[a].initial_rank.cmp(&scores[b].initial_rank))
    });
    let ranking = ranking_from_order(q.id(), candidates, &order, judge.provenance("allpair"));
    Ok((ranking, counter))
}
