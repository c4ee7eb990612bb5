// PRP-Sorting: heapsort with the pairwise judge as comparator. Compares the
// cost against Allpair on the same 100 candidates.

use prp::backend::OracleBackend;
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::metrics::QrelSet;
use prp::model::{Passage, Query};
use prp::strategy::{rank_allpair, rank_heapsort};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let n = 100;
    let query = Query::new("q", "which passage is best")?;
    // grades are a fixed scramble of 0..n
    let grade = |i: usize| ((i * 37 + 11) % n) as u32;
    let candidates = (0..n)
        .map(|i| Passage::new(format!("d{i}"), format!("passage number {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let qrels = QrelSet::from_triples((0..n).map(|i| ("q", format!("d{i}"), grade(i))))?;
    let judge = PairwiseComparator::new(OracleBackend::new(qrels), ComparatorConfig::default())?;

    let (sorted, heap_cost) = rank_heapsort(&query, &candidates, &judge)?;
    let (all, all_cost) = rank_allpair(&query, &candidates, &judge, 8)?;
    println!("top 5 by heapsort: {:?}", &sorted.ordered_passage_ids[..5]);
    println!("heapsort: {} pairs / {} prompts", heap_cost.pair_comparisons, heap_cost.unit_calls);
    println!("allpair:  {} pairs / {} prompts", all_cost.pair_comparisons, all_cost.unit_calls);
    assert_eq!(sorted.ordered_passage_ids, all.ordered_passage_ids);
    assert!(heap_cost.pair_comparisons <= 2 * 100 * 7 + 100);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
