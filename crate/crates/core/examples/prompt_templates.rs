// Rendering the pairwise and pointwise prompts, and parsing free-text
// answers in generation mode.

use prp::model::{Passage, Query};
use prp::prompt::{parse_pairwise_generation, render_pairwise, render_pointwise_rg, ParsedChoice, PromptTemplates};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let q = Query::new("q1", "what is reba mcentire's net worth")?;
    let a = Passage::new("d1", "Reba McEntire's net worth is estimated at $95 million.")?;
    let b = Passage::new("d2", "Reba is an American sitcom that ran from 2001 to 2007, starring a country singer in the title role.")?;

    let prompt = render_pairwise(&q, &a, &b, 1000)?;
    println!("{}\n", prompt.text);
    // passages are cut at a word boundary
    let short = render_pairwise(&q, &a, &b, 40)?;
    println!("{}\n", short.text);
    println!("{}\n", render_pointwise_rg(&q, &a, 1000)?.text);

    for answer in ["Passage A", "  passage b.", "\"Passage A\" is more relevant", "B", "Both are relevant"] {
        println!("{answer:?} -> {:?}", parse_pairwise_generation(answer));
    }
    assert_eq!(parse_pairwise_generation("Passage about Reba"), ParsedChoice::Unparseable);

    let custom = PromptTemplates::custom(
        "Query: {query}\nA: {passage_a}\nB: {passage_b}\nBetter:",
        "{passage}\nRelevant to {query}?",
    )?;
    println!("custom template hash {} (default {})", custom.hash(), PromptTemplates::default().hash());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run()
}
