//! Prompt rendering and generation-mode answer parsing.
//!
//! The built-in templates live in `templates/*.txt` and are compiled in.
//! Callers may supply their own through [`PromptTemplates::custom`]; the
//! template hash changes with the text, so cached judgments and ranking
//! provenance never mix outputs of different prompts.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::InputError;
use crate::model::{Passage, Query};

const PAIRWISE_V1: &str = include_str!("../templates/pairwise_v1.txt");
const POINTWISE_RG_V1: &str = include_str!("../templates/pointwise_rg_v1.txt");

/// Scored target for "the first slot wins".
pub const TARGET_PASSAGE_A: &str = "Passage A";
/// Scored target for "the second slot wins".
pub const TARGET_PASSAGE_B: &str = "Passage B";
pub const TARGET_YES: &str = "Yes";
pub const TARGET_NO: &str = "No";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptKind {
    PairwiseAB,
    PointwiseRG,
}

/// Identifies what a prompt is about. Remote backends only see the text;
/// simulated backends use the ids to look up ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptSubject {
    pub query_id: String,
    /// Passage ids in slot order (A then B for pairwise prompts).
    pub passage_ids: Vec<String>,
}

/// A fully rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    pub text: String,
    pub kind: PromptKind,
    pub subject: PromptSubject,
}

/// Answer read from a generation-mode completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParsedChoice {
    ChoseA,
    ChoseB,
    Unparseable,
}

const PAIRWISE_SLOTS: &[&str] = &["query", "passage_a", "passage_b"];
const POINTWISE_SLOTS: &[&str] = &["query", "passage"];

/// The pair of templates used for rendering, plus their content hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pairwise: String,
    pointwise_rg: String,
    hash: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self::custom(PAIRWISE_V1, POINTWISE_RG_V1).expect("built-in templates are valid")
    }
}

impl PromptTemplates {
    /// Validates and installs custom templates. Placeholders use `{name}`.
    pub fn custom(pairwise: &str, pointwise_rg: &str) -> Result<Self, InputError> {
        check_template(pairwise, PAIRWISE_SLOTS)?;
        check_template(pointwise_rg, POINTWISE_SLOTS)?;
        let mut h = Sha256::new();
        h.update(b"pairwise\0");
        h.update(pairwise.as_bytes());
        h.update(b"\0pointwise_rg\0");
        h.update(pointwise_rg.as_bytes());
        let hash = hex::encode(h.finalize())[..16].to_string();
        Ok(Self {
            pairwise: pairwise.to_string(),
            pointwise_rg: pointwise_rg.to_string(),
            hash,
        })
    }

    pub fn pairwise(&self) -> &str {
        &self.pairwise
    }

    pub fn pointwise_rg(&self) -> &str {
        &self.pointwise_rg
    }

    /// 16 hex chars of SHA-256 over both templates.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn render_pairwise(
        &self,
        q: &Query,
        a: &Passage,
        b: &Passage,
        trunc: usize,
    ) -> Result<PromptText, InputError> {
        let pa = passage_slot(a, trunc)?;
        let pb = passage_slot(b, trunc)?;
        let text = substitute(&self.pairwise, |name| match name {
            "query" => Some(q.text()),
            "passage_a" => Some(pa),
            "passage_b" => Some(pb),
            _ => None,
        });
        Ok(PromptText {
            text,
            kind: PromptKind::PairwiseAB,
            subject: PromptSubject {
                query_id: q.id().to_string(),
                passage_ids: vec![a.id().to_string(), b.id().to_string()],
            },
        })
    }

    pub fn render_pointwise_rg(&self, q: &Query, p: &Passage, trunc: usize) -> Result<PromptText, InputError> {
        let pp = passage_slot(p, trunc)?;
        let text = substitute(&self.pointwise_rg, |name| match name {
            "query" => Some(q.text()),
            "passage" => Some(pp),
            _ => None,
        });
        Ok(PromptText {
            text,
            kind: PromptKind::PointwiseRG,
            subject: PromptSubject {
                query_id: q.id().to_string(),
                passage_ids: vec![p.id().to_string()],
            },
        })
    }
}

/// Renders the built-in pairwise template.
pub fn render_pairwise(q: &Query, a: &Passage, b: &Passage, trunc: usize) -> Result<PromptText, InputError> {
    PromptTemplates::default().render_pairwise(q, a, b, trunc)
}

/// Renders the built-in pointwise relevance-generation template.
pub fn render_pointwise_rg(q: &Query, p: &Passage, trunc: usize) -> Result<PromptText, InputError> {
    PromptTemplates::default().render_pointwise_rg(q, p, trunc)
}

fn passage_slot(p: &Passage, trunc: usize) -> Result<&str, InputError> {
    if trunc == 0 {
        return Err(InputError::InvalidTruncation);
    }
    if p.text().trim().is_empty() {
        return Err(InputError::EmptyText {
            what: "passage",
            id: p.id().to_string(),
        });
    }
    Ok(truncate_chars(p.text(), trunc))
}

/// Cuts `text` to at most `limit` characters, backing off to the last
/// whitespace boundary inside the limit when there is one.
pub fn truncate_chars(text: &str, limit: usize) -> &str {
    let Some((cut, next)) = text.char_indices().nth(limit) else {
        return text;
    };
    let head = &text[..cut];
    if next.is_whitespace() {
        return head.trim_end();
    }
    match head.rfind(char::is_whitespace) {
        Some(ws) if !head[..ws].trim_end().is_empty() => head[..ws].trim_end(),
        _ => head,
    }
}

/// Iterates `{name}` placeholder spans as (start, end, name).
fn placeholders(template: &str) -> impl Iterator<Item = (usize, usize, &str)> {
    let bytes = template.as_bytes();
    let mut pos = 0;
    std::iter::from_fn(move || {
        while pos < bytes.len() {
            if bytes[pos] == b'{' {
                let start = pos;
                let mut end = pos + 1;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                if end < bytes.len() && bytes[end] == b'}' && end > start + 1 {
                    pos = end + 1;
                    return Some((start, end + 1, &template[start + 1..end]));
                }
            }
            pos += 1;
        }
        None
    })
}

fn check_template(template: &str, slots: &[&str]) -> Result<(), InputError> {
    if template.trim().is_empty() {
        return Err(InputError::Template("template is empty".into()));
    }
    let mut seen = vec![false; slots.len()];
    for (_, _, name) in placeholders(template) {
        match slots.iter().position(|s| *s == name) {
            Some(i) => seen[i] = true,
            None => return Err(InputError::Template(format!("unknown placeholder {{{name}}}"))),
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(InputError::Template(format!("missing placeholder {{{}}}", slots[i])));
    }
    Ok(())
}

// Single pass, so placeholder-like text inside a passage is never expanded.
fn substitute<'a>(template: &str, value: impl Fn(&str) -> Option<&'a str>) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut last = 0;
    for (start, end, name) in placeholders(template) {
        if let Some(v) = value(name) {
            out.push_str(&template[last..start]);
            out.push_str(v);
            last = end;
        }
    }
    out.push_str(&template[last..]);
    out
}

/// Reads a pairwise choice out of free-form generated text.
///
/// Accepts "Passage A"/"Passage B" as a case-insensitive prefix, or a bare
/// "A"/"B" surrounded only by punctuation. Everything else is unparseable.
pub fn parse_pairwise_generation(text: &str) -> ParsedChoice {
    let lowered = text
        .trim()
        .trim_start_matches(|c: char| c == '"' || c == '\'' || c == '`' || c.is_whitespace())
        .to_lowercase();
    for (prefix, choice) in [("passage a", ParsedChoice::ChoseA), ("passage b", ParsedChoice::ChoseB)] {
        if let Some(rest) = lowered.strip_prefix(prefix) {
            if !rest.starts_with(|c: char| c.is_alphanumeric()) {
                return choice;
            }
        }
    }
    match lowered.trim_matches(|c: char| !c.is_alphanumeric()) {
        "a" => ParsedChoice::ChoseA,
        "b" => ParsedChoice::ChoseB,
        _ => ParsedChoice::Unparseable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REBA_Q: &str = "what is reba mcentire's net worth";
    const REBA_A: &str = "Reba Mcentire. Reba Mcentire Net Worth is $65 Million. Reba McEntire is a country music star and actress, originally from Oklahoma, with an estimated net worth of $65 million dollars.";
    const REBA_B: &str = "Born March 28, 1955, in McAlester, Oklahoma, Reba McEntire got her break singing the national anthem at the 1974 rodeo finals.";

    fn q() -> Query {
        Query::new("q1", REBA_Q).unwrap()
    }

    fn p(id: &str, text: &str) -> Passage {
        Passage::new(id, text).unwrap()
    }

    #[test]
    fn pairwise_prompt_is_exact() {
        let prompt = render_pairwise(&q(), &p("a", REBA_A), &p("b", REBA_B), 10_000).unwrap();
        let expected = format!(
            "Given a query \"{REBA_Q}\", which of the following two passages is more relevant to the query?\n\nPassage A: {REBA_A}\n\nPassage B: {REBA_B}\n\nOutput Passage A or Passage B:"
        );
        assert_eq!(prompt.text, expected);
        assert_eq!(prompt.text.lines().last(), Some("Output Passage A or Passage B:"));
        assert_eq!(prompt.kind, PromptKind::PairwiseAB);
        assert_eq!(prompt.subject.passage_ids, vec!["a", "b"]);
    }

    #[test]
    fn identical_passages_fill_both_slots() {
        let prompt = render_pairwise(&q(), &p("a", "same text"), &p("b", "same text"), 512).unwrap();
        assert!(prompt.text.contains("Passage A: same text\n\nPassage B: same text\n\n"));
    }

    #[test]
    fn long_passage_is_truncated() {
        let long = "word ".repeat(2000);
        assert_eq!(long.chars().count(), 10_000);
        let prompt = render_pairwise(&q(), &p("a", &long), &p("b", REBA_B), 512).unwrap();
        let start = prompt.text.find("Passage A: ").unwrap() + "Passage A: ".len();
        let end = prompt.text.find("\n\nPassage B: ").unwrap();
        let slot = &prompt.text[start..end];
        assert!(slot.chars().count() <= 512);
        assert!(slot.ends_with("word"));
    }

    #[test]
    fn pointwise_prompt_is_exact() {
        let prompt = render_pointwise_rg(&q(), &p("a", REBA_A), 10_000).unwrap();
        assert_eq!(
            prompt.text,
            format!("Passage: {REBA_A}\nQuery: {REBA_Q}\nDoes the passage answer the query?")
        );
        assert!(prompt.text.ends_with("Does the passage answer the query?"));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            render_pointwise_rg(&q(), &p("a", ""), 10),
            Err(InputError::EmptyText { .. })
        ));
        assert!(render_pairwise(&q(), &p("a", "x"), &p("b", "  "), 10).is_err());
        assert_eq!(
            render_pairwise(&q(), &p("a", "x"), &p("b", "y"), 0),
            Err(InputError::InvalidTruncation)
        );
    }

    #[test]
    fn truncation_rule() {
        assert_eq!(truncate_chars("abcdefgh", 5), "abcde");
        assert_eq!(truncate_chars("abc def", 5), "abc");
        assert_eq!(truncate_chars("abc def", 3), "abc");
        assert_eq!(truncate_chars("abc def", 7), "abc def");
        assert_eq!(truncate_chars("ééééé ééé", 7), "ééééé");
        let prompt = render_pointwise_rg(&q(), &p("a", "abcdefgh"), 5).unwrap();
        assert!(prompt.text.starts_with("Passage: abcde\n"));
    }

    #[test]
    fn placeholder_text_in_passage_is_not_expanded() {
        let prompt = render_pairwise(&q(), &p("a", "{passage_b}"), &p("b", "real"), 100).unwrap();
        assert!(prompt.text.contains("Passage A: {passage_b}\n"));
    }

    #[test]
    fn custom_templates_change_hash() {
        let default = PromptTemplates::default();
        let custom = PromptTemplates::custom(
            "Q: {query}\nA: {passage_a}\nB: {passage_b}\nWhich?",
            POINTWISE_RG_V1,
        )
        .unwrap();
        assert_ne!(default.hash(), custom.hash());
        assert_eq!(default.hash(), PromptTemplates::default().hash());
        assert!(PromptTemplates::custom("{query} {passage_a}", POINTWISE_RG_V1).is_err());
        assert!(PromptTemplates::custom("{query} {passage_a} {passage_b} {oops}", POINTWISE_RG_V1).is_err());
    }

    #[test]
    fn parse_table() {
        use ParsedChoice::*;
        let cases = [
            ("Passage A", ChoseA),
            ("Passage B", ChoseB),
            ("  passage b.", ChoseB),
            ("\"Passage A\"", ChoseA),
            ("PASSAGE A is more relevant", ChoseA),
            ("A", ChoseA),
            ("(b)", ChoseB),
            ("b.", ChoseB),
            ("Both passages are relevant", Unparseable),
            ("Passage about net worth", Unparseable),
            ("I cannot decide", Unparseable),
            ("", Unparseable),
            ("Passage", Unparseable),
            ("Passage C", Unparseable),
            ("ab", Unparseable),
        ];
        for (text, want) in cases {
            assert_eq!(parse_pairwise_generation(text), want, "{text:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn swapping_changes_only_slots(a in "[a-z ]{1,40}[a-z]", b in "[a-z ]{1,40}[a-z]") {
            let pa = p("a", &a);
            let pb = p("b", &b);
            let ab = render_pairwise(&q(), &pa, &pb, 1000).unwrap();
            let ba = render_pairwise(&q(), &pb, &pa, 1000).unwrap();
            let skeleton = |t: &str, x: &str, y: &str| {
                t.replacen(&format!("Passage A: {x}\n"), "Passage A: <>\n", 1)
                    .replacen(&format!("Passage B: {y}\n"), "Passage B: <>\n", 1)
            };
            proptest::prop_assert_eq!(skeleton(&ab.text, &a, &b), skeleton(&ba.text, &b, &a));
        }

        #[test]
        fn truncation_never_exceeds_limit(text in "\\PC{0,300}", limit in 1usize..200) {
            let cut = truncate_chars(&text, limit);
            proptest::prop_assert!(cut.chars().count() <= limit);
            proptest::prop_assert!(text.starts_with(cut));
        }
    }
}
