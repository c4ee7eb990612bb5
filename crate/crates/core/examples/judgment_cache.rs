// Judgments persist in a JSON-lines file keyed by backend, template, mode,
// query and ordered passage pair. A second run over the same pairs costs no
// backend calls.

use std::sync::Arc;

use prp::backend::OracleBackend;
use prp::cache::JudgmentCache;
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::metrics::QrelSet;
use prp::model::{Passage, Query};
use prp::strategy::rank_allpair;

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("prp-cache-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("judgments.jsonl");
    let _ = std::fs::remove_file(&path);

    let query = Query::new("q", "query")?;
    let candidates = (0..6)
        .map(|i| Passage::new(format!("d{i}"), format!("text {i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let qrels = QrelSet::from_triples((0..6).map(|i| ("q", format!("d{i}"), (i * 5 % 6) as u32)))?;

    let mut costs = Vec::new();
    for round in 1..=2 {
        // reopening the file each round, as a new process would
        let cache = Arc::new(JudgmentCache::open(&path)?);
        let judge = PairwiseComparator::new(OracleBackend::new(qrels.clone()), ComparatorConfig::default())?.with_cache(cache.clone());
        let (ranking, counter) = rank_allpair(&query, &candidates, &judge, 2)?;
        println!(
            "round {round}: {} backend calls, {} cache hits, {} cached records -> {}",
            counter.unit_calls,
            counter.cache_hits,
            cache.len(),
            ranking.ordered_passage_ids.join(" ")
        );
        costs.push(counter);
    }
    assert_eq!(costs[0].unit_calls, 30);
    assert_eq!(costs[1].unit_calls, 0);
    assert_eq!(costs[1].cache_hits, 30);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
