use crate::comparator::PairJudge;
use crate::error::RankError;
use crate::model::{Passage, Preference, Query, Ranking};

use super::{ranking_from_order, CallCounter, Direction};

fn pass_indices<J: PairJudge + ?Sized>(
    q: &Query,
    candidates: &[Passage],
    order: &mut [usize],
    judge: &J,
    direction: Direction,
    counter: &mut CallCounter,
) -> Result<(), RankError> {
    let n = order.len();
    if n < 2 {
        return Ok(());
    }
    let mut step = |i: usize| -> Result<(), RankError> {
        let judged = judge.judge(q, &candidates[order[i]], &candidates[order[i + 1]])?;
        counter.record(&judged);
        if judged.preference == Preference::SecondWins {
            order.swap(i, i + 1);
        }
        Ok(())
    };
    match direction {
        Direction::Backward => (0..n - 1).rev().try_for_each(&mut step),
        Direction::Forward => (0..n - 1).try_for_each(&mut step),
    }
}

/// One bubble-sort sweep over adjacent pairs: a pair swaps only when the
/// lower-placed passage consistently wins. Exactly `N - 1` comparisons.
pub fn sliding_pass<J: PairJudge + ?Sized>(
    q: &Query,
    current: &[Passage],
    judge: &J,
    direction: Direction,
) -> Result<(Vec<Passage>, CallCounter), RankError> {
    if current.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    let mut order: Vec<usize> = (0..current.len()).collect();
    let mut counter = CallCounter::default();
    pass_indices(q, current, &mut order, judge, direction, &mut counter)?;
    Ok((order.into_iter().map(|i| current[i].clone()).collect(), counter))
}

/// `passes` successive sliding passes starting from the initial order.
pub fn rank_sliding_k<J: PairJudge + ?Sized>(
    q: &Query,
    candidates: &[Passage],
    judge: &J,
    passes: usize,
    direction: Direction,
) -> Result<(Ranking, CallCounter), RankError> {
    if passes == 0 {
        return Err(RankError::InvalidPasses);
    }
    if candidates.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let mut counter = CallCounter::default();
    for _ in 0..passes {
        pass_indices(q, candidates, &mut order, judge, direction, &mut counter)?;
    }
    let name = format!("sliding-{passes}-{}", direction.as_str());
    let ranking = ranking_from_order(q.id(), candidates, &order, judge.provenance(&name));
    Ok((ranking, counter))
}
