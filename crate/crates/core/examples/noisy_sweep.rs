// How each strategy degrades as the comparator gets less reliable. A small
// version of `prp simulate`.

use prp::config::StrategyKind;
use prp::harness::{simulate, SimulationSpec};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SimulationSpec {
        flip_probs: vec![0.0, 0.1, 0.3],
        list_size: 30,
        trials: 20,
        seed: 42,
        strategies: vec![StrategyKind::Allpair, StrategyKind::Sorting, StrategyKind::Sliding],
        k_passes: 10,
        ks: vec![10],
        ..SimulationSpec::default()
    };
    let table = simulate(&spec)?;
    print!("{}", table.to_tsv());
    for s in ["allpair", "sorting", "sliding-10-backward"] {
        assert_eq!(table.row(s, 0.0).unwrap().mean[0], 1.0);
        assert!(table.row(s, 0.3).unwrap().mean[0] < 1.0);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
