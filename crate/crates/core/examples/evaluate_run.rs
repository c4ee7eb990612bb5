// Score a TREC run file against qrels with NDCG@{1,5,10}.

use prp::harness::evaluate;
use prp::io::{parse_qrels, parse_run_rankings, RunOptions};

const QRELS: &str = "\
q1 0 a 3
q1 0 b 2
q1 0 c 0
q2 0 x 1
q2 0 y 0
";

const RUN: &str = "\
q1 Q0 c 1 9.1 bm25
q1 Q0 a 2 8.7 bm25
q1 Q0 b 3 8.2 bm25
q2 Q0 x 1 3.0 bm25
q2 Q0 y 2 2.5 bm25
";

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let qrels = parse_qrels(QRELS.as_bytes())?;
    let run = parse_run_rankings(RUN.as_bytes(), RunOptions::default())?;
    let report = evaluate(&run, &qrels, &[1, 5, 10])?;
    print!("{}", report.to_tsv());
    // q1 is ranked [0, 3, 2] against an ideal [3, 2, 0]
    assert!((report.per_query[0].ndcg[2] - 0.6653).abs() < 1e-3);
    assert_eq!(report.per_query[1].ndcg, vec![1.0, 1.0, 1.0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
