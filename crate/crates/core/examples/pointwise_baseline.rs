// The pointwise relevance-generation baseline scores each passage alone from
// the likelihoods of "Yes" and "No". Here a backend with one miscalibrated
// passage shows why comparing pairs is more robust.

use prp::backend::{Backend, BackendCapability, ScoredTargets};
use prp::comparator::{ComparatorConfig, PairwiseComparator};
use prp::model::{Passage, Query};
use prp::pointwise::{rank_pointwise, rg_from_logliks};
use prp::prompt::{PromptKind, PromptTemplates, PromptText};
use prp::strategy::rank_allpair;
use prp::BackendError;

/// True relevance is d1 > d2 > d3, but the model is overconfident on d3
/// whenever it is judged alone.
struct Overconfident;

fn relevance(id: &str) -> f64 {
    match id {
        "d1" => 0.9,
        "d2" => 0.6,
        _ => 0.3,
    }
}

impl Backend for Overconfident {
    fn name(&self) -> &str {
        "overconfident"
    }

    fn capability(&self) -> BackendCapability {
        BackendCapability {
            supports_scoring: true,
            supports_generation: false,
        }
    }

    fn score_targets(&self, prompt: &PromptText, targets: &[&str]) -> Result<ScoredTargets, BackendError> {
        let ids = &prompt.subject.passage_ids;
        let (yes_like, no_like) = match prompt.kind {
            PromptKind::PointwiseRG if ids[0] == "d3" => (0.95, 0.05),
            PromptKind::PointwiseRG => (relevance(&ids[0]), 1.0 - relevance(&ids[0])),
            PromptKind::PairwiseAB => (relevance(&ids[0]), relevance(&ids[1])),
        };
        Ok(ScoredTargets::new(vec![
            (targets[0].to_string(), f64::ln(yes_like)),
            (targets[1].to_string(), f64::ln(no_like)),
        ]))
    }

    fn generate(&self, _: &PromptText, _: usize) -> Result<String, BackendError> {
        Err(BackendError::Protocol("generation not supported".into()))
    }
}

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    println!("rg(p_yes=0.9, p_no=0.1) = {:.2}", rg_from_logliks(0.9f64.ln(), 0.1f64.ln()));
    println!("rg(p_yes=0.2, p_no=0.8) = {:.2}", rg_from_logliks(0.2f64.ln(), 0.8f64.ln()));

    let query = Query::new("q", "query")?;
    let candidates = ["d2", "d3", "d1"]
        .iter()
        .map(|id| Passage::new(*id, format!("text of {id}")))
        .collect::<Result<Vec<_>, _>>()?;

    let (pointwise, _) = rank_pointwise(&query, &candidates, &Overconfident, &PromptTemplates::default(), 1000, 1)?;
    let judge = PairwiseComparator::new(Overconfident, ComparatorConfig::default())?;
    let (pairwise, _) = rank_allpair(&query, &candidates, &judge, 1)?;
    println!("pointwise: {}", pointwise.ordered_passage_ids.join(" > "));
    println!("pairwise:  {}", pairwise.ordered_passage_ids.join(" > "));
    assert_eq!(pointwise.ordered_passage_ids[0], "d3");
    assert_eq!(pairwise.ordered_passage_ids, ["d1", "d2", "d3"]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
