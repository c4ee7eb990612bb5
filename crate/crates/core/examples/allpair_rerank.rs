// Rerank a handful of passages with PRP-Allpair, using an oracle backend
// that answers from relevance labels.

use prp::backend::OracleBackend;
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::metrics::QrelSet;
use prp::model::{Passage, Query};
use prp::strategy::{allpair_scores, rank_allpair};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let query = Query::new("q1", "what is reba mcentire's net worth")?;
    // first-stage order: the most relevant passage starts last
    let candidates = vec![
        Passage::new("p-tour", "Reba McEntire toured with George Strait in 2018.")?,
        Passage::new("p-show", "The sitcom Reba ran for six seasons.")?,
        Passage::new("p-album", "Reba released her first album in 1977.")?,
        Passage::new("p-worth", "Reba McEntire's net worth is estimated at $95 million.")?,
    ];
    let qrels = QrelSet::from_triples([
        ("q1", "p-worth", 3),
        ("q1", "p-album", 1),
        ("q1", "p-show", 1),
        ("q1", "p-tour", 0),
    ])?;

    let judge = PairwiseComparator::new(OracleBackend::new(qrels), ComparatorConfig::default())?;
    let (scores, counter) = allpair_scores(&query, &candidates, &judge, 4)?;
    for s in &scores {
        println!("{:>8}  score {:.1}", s.passage_id, s.score);
    }
    let (ranking, _) = rank_allpair(&query, &candidates, &judge, 4)?;
    println!("ranking: {}", ranking.ordered_passage_ids.join(" > "));
    println!("{} pairs, {} prompts", counter.pair_comparisons, counter.unit_calls);
    assert_eq!(ranking.ordered_passage_ids[0], "p-worth");
    // p-album and p-show tie on 1.5 points; initial order decides
    assert_eq!(ranking.ordered_passage_ids[1..3], ["p-show", "p-album"]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
