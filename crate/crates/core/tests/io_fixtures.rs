use std::path::PathBuf;

use prp::harness::evaluate;
use prp::io::{candidates_to_entries, parse_qrels, parse_run, parse_run_rankings, write_run, RunOptions};

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn hundred_line_run_roundtrip() {
    let raw = fixture("bm25_top100.run");
    let parsed = parse_run(raw.as_bytes(), RunOptions::default()).unwrap();
    assert_eq!(parsed.queries.len(), 2);
    assert_eq!(parsed.queries.iter().map(|c| c.len()).sum::<usize>(), 100);
    assert_eq!(parsed.tag.as_deref(), Some("bm25_raw"));

    let mut once = Vec::new();
    write_run(&mut once, &candidates_to_entries(&parsed.queries, "bm25")).unwrap();
    let reparsed = parse_run(once.as_slice(), RunOptions::default()).unwrap();
    let mut twice = Vec::new();
    write_run(&mut twice, &candidates_to_entries(&reparsed.queries, "bm25")).unwrap();
    assert_eq!(once, twice);

    // normalization only rounds scores
    for (a, b) in parsed.queries.iter().zip(&reparsed.queries) {
        assert_eq!(a.query_id(), b.query_id());
        assert!(a.passage_ids().eq(b.passage_ids()));
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert!((x.score - y.score).abs() <= x.score.abs() * 1e-5);
        }
    }
}

#[test]
fn evaluation_matches_hand_computed_table() {
    let run = parse_run_rankings(fixture("small.run").as_bytes(), RunOptions::default()).unwrap();
    let qrels = parse_qrels(fixture("small.qrels").as_bytes()).unwrap();
    let report = evaluate(&run, &qrels, &[1, 3, 5, 10]).unwrap();
    assert_eq!(report.to_tsv(), fixture("small_expected.tsv"));
    assert_eq!(report.skipped, vec!["q9"]);
}

#[test]
fn ideal_run_scores_one() {
    let qrels = parse_qrels(fixture("small.qrels").as_bytes()).unwrap();
    let run = "q1 Q0 a 1 4 x\nq1 Q0 b 2 3 x\nq1 Q0 z 3 2 x\nq1 Q0 c 4 1 x\n";
    let report = evaluate(&parse_run_rankings(run.as_bytes(), RunOptions::default()).unwrap(), &qrels, &[1, 5, 10]).unwrap();
    assert_eq!(report.mean, vec![1.0, 1.0, 1.0]);
}
