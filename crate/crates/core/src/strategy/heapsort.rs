use crate::comparator::PairJudge;
use crate::error::RankError;
use crate::model::{Passage, Preference, Query, Ranking};

use super::{ranking_from_order, CallCounter};

struct Sorter<'a, J: ?Sized> {
    q: &'a Query,
    candidates: &'a [Passage],
    judge: &'a J,
    counter: CallCounter,
}

impl<J: PairJudge + ?Sized> Sorter<'_, J> {
    /// Does candidate `a` belong above candidate `b`? Ambiguous pairs keep
    /// their initial order.
    fn above(&mut self, a: usize, b: usize) -> Result<bool, RankError> {
        let judged = self.judge.judge(self.q, &self.candidates[a], &self.candidates[b])?;
        self.counter.record(&judged);
        Ok(match judged.preference {
            Preference::FirstWins => true,
            Preference::SecondWins => false,
            Preference::Ambiguous => a < b,
        })
    }

    // The heap keeps the passage that belongs lowest at its root.
    fn sift_down(&mut self, v: &mut [usize], mut root: usize, end: usize) -> Result<(), RankError> {
        loop {
            let mut child = 2 * root + 1;
            if child >= end {
                return Ok(());
            }
            if child + 1 < end && self.above(v[child], v[child + 1])? {
                child += 1;
            }
            if !self.above(v[root], v[child])? {
                return Ok(());
            }
            v.swap(root, child);
            root = child;
        }
    }
}

/// Heapsort with the pairwise judge as comparator. Uses at most
/// `2·N·⌈log2 N⌉ + N` pair comparisons.
pub fn rank_heapsort<J: PairJudge + ?Sized>(
    q: &Query,
    candidates: &[Passage],
    judge: &J,
) -> Result<(Ranking, CallCounter), RankError> {
    if candidates.is_empty() {
        return Err(RankError::EmptyCandidates);
    }
    let n = candidates.len();
    let mut v: Vec<usize> = (0..n).collect();
    let mut sorter = Sorter {
        q,
        candidates,
        judge,
        counter: CallCounter::default(),
    };
    for start in (0..n / 2).rev() {
        sorter.sift_down(&mut v, start, n)?;
    }
    for end in (1..n).rev() {
        v.swap(0, end);
        sorter.sift_down(&mut v, 0, end)?;
    }
    let ranking = ranking_from_order(q.id(), candidates, &v, judge.provenance("sorting"));
    Ok((ranking, sorter.counter))
}
