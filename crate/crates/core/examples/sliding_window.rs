// PRP-Sliding-K: bubble passes over adjacent pairs. K backward passes fix
// the top K; a forward pass only moves the best passage up by one slot.

use prp::backend::OracleBackend;
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::metrics::QrelSet;
use prp::model::{Passage, Query};
use prp::strategy::{rank_sliding_k, sliding_pass, Direction};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let query = Query::new("q", "query")?;
    // worst first: d0 has grade 0, d9 grade 9
    let candidates = (0..10)
        .map(|i| Passage::new(format!("d{i}"), format!("text {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let qrels = QrelSet::from_triples((0..10).map(|i| ("q", format!("d{i}"), i as u32)))?;
    let judge = PairwiseComparator::new(OracleBackend::new(qrels), ComparatorConfig::default())?;

    let mut current = candidates.clone();
    for pass in 1..=3 {
        current = sliding_pass(&query, &current, &judge, Direction::Backward)?.0;
        let ids: Vec<&str> = current.iter().map(Passage::id).collect();
        println!("after backward pass {pass}: {}", ids.join(" "));
    }
    let (ranking, counter) = rank_sliding_k(&query, &candidates, &judge, 3, Direction::Backward)?;
    assert_eq!(ranking.ordered_passage_ids[..3], ["d9", "d8", "d7"]);
    println!("{}: {} pairs", ranking.provenance.strategy, counter.pair_comparisons);

    let (forward, _) = sliding_pass(&query, &candidates, &judge, Direction::Forward)?;
    let ids: Vec<&str> = forward.iter().map(Passage::id).collect();
    println!("after one forward pass:  {}", ids.join(" "));
    assert_eq!(ids[8], "d9");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
