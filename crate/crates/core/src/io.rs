//! Line-oriented file formats: TREC qrels and run files, tab-separated
//! queries, and a JSON-lines passage corpus.
//!
//! Blank lines are skipped everywhere. Any other line is either consumed or
//! reported as an error with its 1-based line number.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::Deserialize;

use crate::error::FormatError;
use crate::metrics::QrelSet;
use crate::model::{CandidateEntry, CandidateList, Passage, Query, Ranking, ranks_to_run_scores};

/// One line of a run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub query_id: String,
    pub passage_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Parsing options for run files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Reject score/rank order violations instead of warning.
    pub strict: bool,
    pub max_candidates: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            strict: true,
            max_candidates: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRun {
    /// Per-query candidates in rank order; queries in order of first appearance.
    pub queries: Vec<CandidateList>,
    /// Tag of the first line, if any.
    pub tag: Option<String>,
    /// Demoted ordering violations (lenient mode only).
    pub warnings: Vec<String>,
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String), FormatError>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(FormatError::from))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

fn malformed(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Malformed {
        line,
        reason: reason.into(),
    }
}

/// Parses `qid 0 docid grade` lines.
pub fn parse_qrels<R: BufRead>(reader: R) -> Result<QrelSet, FormatError> {
    let mut qrels = QrelSet::new();
    for item in lines(reader) {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _iter, docid, grade] = fields[..] else {
            return Err(malformed(n, format!("expected 4 fields, found {}", fields.len())));
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| malformed(n, format!("grade `{grade}` is not an integer")))?;
        if grade < 0 {
            return Err(FormatError::NegativeGrade { line: n, grade });
        }
        let grade = u32::try_from(grade).map_err(|_| malformed(n, format!("grade {grade} out of range")))?;
        if !qrels.insert(qid, docid, grade) {
            return Err(FormatError::DuplicateKey {
                line: n,
                query_id: qid.to_string(),
                doc_id: docid.to_string(),
            });
        }
    }
    Ok(qrels)
}

pub fn write_qrels<W: Write>(mut writer: W, qrels: &QrelSet) -> std::io::Result<()> {
    for (q, d, g) in qrels.iter() {
        writeln!(writer, "{q} 0 {d} {g}")?;
    }
    Ok(())
}

// (rank, docid, score) rows plus the docids seen so far, per query.
type Grouped = HashMap<String, (Vec<(usize, String, f64)>, HashSet<String>)>;

/// Parses `qid Q0 docid rank score tag` lines into per-query candidate lists.
pub fn parse_run<R: BufRead>(reader: R, opts: RunOptions) -> Result<ParsedRun, FormatError> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: Grouped = HashMap::new();
    let mut tag = None;
    for item in lines(reader) {
        let (n, line) = item?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, q0, docid, rank, score, t] = fields[..] else {
            return Err(malformed(n, format!("expected 6 fields, found {}", fields.len())));
        };
        if q0 != "Q0" {
            return Err(malformed(n, format!("second column must be `Q0`, found `{q0}`")));
        }
        let rank: usize = rank
            .parse()
            .map_err(|_| malformed(n, format!("rank `{rank}` is not a positive integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| malformed(n, format!("score `{score}` is not a finite number")))?;
        tag.get_or_insert_with(|| t.to_string());
        let (rows, seen) = grouped.entry(qid.to_string()).or_insert_with(|| {
            order.push(qid.to_string());
            Default::default()
        });
        if !seen.insert(docid.to_string()) {
            return Err(FormatError::DuplicateDocument {
                line: n,
                query_id: qid.to_string(),
                doc_id: docid.to_string(),
            });
        }
        rows.push((rank, docid.to_string(), score));
    }

    let mut queries = Vec::with_capacity(order.len());
    let mut warnings = Vec::new();
    for qid in order {
        let (mut rows, _) = grouped.remove(&qid).unwrap_or_default();
        rows.sort_by_key(|r| r.0);
        for (i, r) in rows.iter().enumerate() {
            if r.0 != i + 1 {
                return Err(FormatError::NonContiguousRanks {
                    query_id: qid,
                    expected: i + 1,
                    found: r.0,
                });
            }
        }
        let violation = rows.windows(2).position(|w| w[1].2 > w[0].2);
        let entries: Vec<CandidateEntry> = rows
            .into_iter()
            .map(|(_, passage_id, score)| CandidateEntry { passage_id, score })
            .collect();
        if entries.len() > opts.max_candidates {
            return Err(crate::error::InputError::TooManyCandidates {
                query_id: qid,
                len: entries.len(),
                max: opts.max_candidates,
            }
            .into());
        }
        let list = match violation {
            None => CandidateList::with_limit(qid, entries, usize::MAX)?,
            Some(i) if opts.strict => return Err(FormatError::ScoreOrder { query_id: qid, rank: i + 1 }),
            Some(i) => {
                let w = format!("query `{qid}`: score increases from rank {} to rank {}", i + 1, i + 2);
                log::warn!("{w}");
                warnings.push(w);
                CandidateList::decoupled(qid, entries)?
            }
        };
        queries.push(list);
    }
    Ok(ParsedRun { queries, tag, warnings })
}

/// Parses a run file into rankings, keeping rank order. Provenance carries the
/// run tag as its strategy name.
pub fn parse_run_rankings<R: BufRead>(reader: R, opts: RunOptions) -> Result<Vec<Ranking>, FormatError> {
    let parsed = parse_run(reader, opts)?;
    let tag = parsed.tag.unwrap_or_default();
    Ok(parsed
        .queries
        .into_iter()
        .map(|c| Ranking {
            query_id: c.query_id().to_string(),
            ordered_passage_ids: c.passage_ids().map(str::to_string).collect(),
            provenance: crate::model::Provenance {
                strategy: tag.clone(),
                backend: String::new(),
                config_hash: String::new(),
            },
        })
        .collect())
}

/// Rounds to 6 significant digits and prints the shortest form of the result.
pub fn format_score(score: f64) -> String {
    let rounded: f64 = format!("{score:.5e}").parse().unwrap_or(score);
    // avoid "-0"
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

pub fn write_run<W: Write>(mut writer: W, entries: &[RunEntry]) -> std::io::Result<()> {
    for e in entries {
        writeln!(
            writer,
            "{} Q0 {} {} {} {}",
            e.query_id,
            e.passage_id,
            e.rank,
            format_score(e.score),
            e.tag
        )?;
    }
    Ok(())
}

pub fn candidates_to_entries(lists: &[CandidateList], tag: &str) -> Vec<RunEntry> {
    lists
        .iter()
        .flat_map(|c| {
            c.entries().iter().enumerate().map(move |(i, e)| RunEntry {
                query_id: c.query_id().to_string(),
                passage_id: e.passage_id.clone(),
                rank: i + 1,
                score: e.score,
                tag: tag.to_string(),
            })
        })
        .collect()
}

/// Run lines for reranked lists, scored `N - rank + 1`.
pub fn rankings_to_entries(rankings: &[Ranking], tag: &str) -> Vec<RunEntry> {
    rankings
        .iter()
        .flat_map(|r| {
            ranks_to_run_scores(r).into_iter().map(move |s| RunEntry {
                query_id: r.query_id.clone(),
                passage_id: s.passage_id,
                rank: s.rank,
                score: s.score,
                tag: tag.to_string(),
            })
        })
        .collect()
}

/// Parses `qid<TAB>text` lines, keeping file order.
pub fn parse_queries<R: BufRead>(reader: R) -> Result<Vec<Query>, FormatError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in lines(reader) {
        let (n, line) = item?;
        let Some((qid, text)) = line.split_once('\t') else {
            return Err(malformed(n, "expected `qid<TAB>text`"));
        };
        let q = Query::new(qid.trim(), text.trim()).map_err(|e| malformed(n, e.to_string()))?;
        if !seen.insert(q.id().to_string()) {
            return Err(FormatError::DuplicateId {
                line: n,
                id: q.id().to_string(),
            });
        }
        out.push(q);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CorpusLine {
    id: serde_json::Value,
    contents: String,
}

/// Passage lookup by id.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    passages: BTreeMap<String, Passage>,
}

impl Corpus {
    pub fn from_passages(passages: impl IntoIterator<Item = Passage>) -> Result<Self, FormatError> {
        let mut corpus = Self::default();
        for (i, p) in passages.into_iter().enumerate() {
            let id = p.id().to_string();
            if corpus.passages.insert(id.clone(), p).is_some() {
                return Err(FormatError::DuplicateId { line: i + 1, id });
            }
        }
        Ok(corpus)
    }

    pub fn get(&self, id: &str) -> Option<&Passage> {
        self.passages.get(id)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// The candidates' passages in list order, or every missing id.
    pub fn resolve(&self, list: &CandidateList) -> Result<Vec<Passage>, FormatError> {
        let mut found = Vec::with_capacity(list.len());
        let mut missing = Vec::new();
        for id in list.passage_ids() {
            match self.passages.get(id) {
                Some(p) => found.push(p.clone()),
                None => missing.push(id.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(found)
        } else {
            Err(FormatError::MissingPassages(missing))
        }
    }
}

/// Parses one JSON object per line with fields `id` and `contents`.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus, FormatError> {
    let mut corpus = Corpus::default();
    for item in lines(reader) {
        let (n, line) = item?;
        let rec: CorpusLine = serde_json::from_str(&line).map_err(|e| malformed(n, e.to_string()))?;
        let id = match rec.id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(x) => x.to_string(),
            other => return Err(malformed(n, format!("id must be a string or number, found {other}"))),
        };
        let p = Passage::new(id, rec.contents).map_err(|e| malformed(n, e.to_string()))?;
        let id = p.id().to_string();
        if corpus.passages.insert(id.clone(), p).is_some() {
            return Err(FormatError::DuplicateId { line: n, id });
        }
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(text: &str, strict: bool) -> Result<ParsedRun, FormatError> {
        parse_run(
            text.as_bytes(),
            RunOptions {
                strict,
                ..RunOptions::default()
            },
        )
    }

    #[test]
    fn qrels_single_and_empty() {
        let q = parse_qrels("q1 0 d1 3".as_bytes()).unwrap();
        assert_eq!(q.grade("q1", "d1"), Some(3));
        assert_eq!(q.len(), 1);
        assert!(parse_qrels("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn qrels_errors_carry_line_numbers() {
        match parse_qrels("q1 0 d1 3\nq1 0 d1 2".as_bytes()) {
            Err(FormatError::DuplicateKey { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_qrels("q1 0 d1 1\n\nq1 0 d2 -1".as_bytes()),
            Err(FormatError::NegativeGrade { line: 3, grade: -1 })
        ));
        assert!(matches!(
            parse_qrels("q1 0 d1".as_bytes()),
            Err(FormatError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_qrels("q1 0 d1 x".as_bytes()),
            Err(FormatError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn run_single_line() {
        let parsed = run("q1 Q0 d9 1 12.5 bm25", true).unwrap();
        assert_eq!(parsed.queries.len(), 1);
        assert_eq!(parsed.queries[0].query_id(), "q1");
        assert_eq!(
            parsed.queries[0].entries(),
            &[CandidateEntry {
                passage_id: "d9".into(),
                score: 12.5
            }]
        );
        assert_eq!(parsed.tag.as_deref(), Some("bm25"));
    }

    #[test]
    fn run_groups_and_sorts_by_rank() {
        let parsed = run("q2 Q0 a 2 1 t\nq1 Q0 x 1 3 t\nq2 Q0 b 1 2 t", true).unwrap();
        let ids: Vec<Vec<&str>> = parsed.queries.iter().map(|c| c.passage_ids().collect()).collect();
        assert_eq!(ids, vec![vec!["b", "a"], vec!["x"]]);
    }

    #[test]
    fn run_contiguity_and_duplicates() {
        assert!(matches!(
            run("q1 Q0 a 1 2 t\nq1 Q0 b 3 1 t", true),
            Err(FormatError::NonContiguousRanks { expected: 2, found: 3, .. })
        ));
        assert!(matches!(
            run("q1 Q0 a 1 2 t\nq1 Q0 a 2 1 t", true),
            Err(FormatError::DuplicateDocument { line: 2, .. })
        ));
        assert!(matches!(run("q1 Q0 a 1 2 t\nq1 Q0 b 1 1 t", true), Err(FormatError::NonContiguousRanks { .. })));
        assert!(matches!(run("q1 Q1 a 1 2 t", true), Err(FormatError::Malformed { line: 1, .. })));
        assert!(matches!(run("q1 Q0 a 1 nan t", true), Err(FormatError::Malformed { .. })));
    }

    #[test]
    fn score_order_strict_vs_lenient() {
        let text = "q1 Q0 a 1 1.0 t\nq1 Q0 b 2 2.0 t";
        assert!(matches!(run(text, true), Err(FormatError::ScoreOrder { rank: 1, .. })));
        let parsed = run(text, false).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.queries[0].is_score_order_decoupled());
        // equal scores are fine
        assert!(run("q1 Q0 a 1 1 t\nq1 Q0 b 2 1 t", true).is_ok());
    }

    #[test]
    fn max_candidates_enforced() {
        let opts = RunOptions {
            strict: true,
            max_candidates: 1,
        };
        assert!(parse_run("q Q0 a 1 2 t\nq Q0 b 2 1 t".as_bytes(), opts).is_err());
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(12.5), "12.5");
        assert_eq!(format_score(1.0), "1");
        assert_eq!(format_score(1.23456789), "1.23457");
        assert_eq!(format_score(-0.0), "0");
        assert_eq!(format_score(123456789.0), "123457000");
        assert_eq!(format_score(0.000123456789), "0.000123457");
    }

    #[test]
    fn queries_parse() {
        let qs = parse_queries("q1\twhat is reba mcentire's net worth\n".as_bytes()).unwrap();
        assert_eq!(qs[0].id(), "q1");
        assert_eq!(qs[0].text(), "what is reba mcentire's net worth");
        assert!(matches!(
            parse_queries("q1\ta\nq1\tb".as_bytes()),
            Err(FormatError::DuplicateId { line: 2, .. })
        ));
        assert!(matches!(parse_queries("q1 no tab".as_bytes()), Err(FormatError::Malformed { line: 1, .. })));
    }

    #[test]
    fn corpus_parse_and_resolve() {
        let corpus = parse_corpus(
            r#"{"id": "d1", "contents": "first"}
{"id": 2, "contents": "second"}"#
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(corpus.get("2").unwrap().text(), "second");
        let list = CandidateList::new(
            "q",
            vec![
                CandidateEntry {
                    passage_id: "d1".into(),
                    score: 2.0,
                },
                CandidateEntry {
                    passage_id: "d404".into(),
                    score: 1.0,
                },
            ],
        )
        .unwrap();
        match corpus.resolve(&list) {
            Err(FormatError::MissingPassages(ids)) => assert_eq!(ids, vec!["d404"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_corpus("{\"id\":\"a\",\"contents\":\"x\"}\n{\"id\":\"a\",\"contents\":\"y\"}".as_bytes()),
            Err(FormatError::DuplicateId { line: 2, .. })
        ));
        assert!(matches!(parse_corpus("not json".as_bytes()), Err(FormatError::Malformed { line: 1, .. })));
    }

    #[test]
    fn qrels_roundtrip() {
        let text = "q1 0 a 2\nq1 0 b 0\nq2 0 c 1\n";
        let mut out = Vec::new();
        write_qrels(&mut out, &parse_qrels(text.as_bytes()).unwrap()).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    fn write_to_string(lists: &[CandidateList], tag: &str) -> String {
        let mut out = Vec::new();
        write_run(&mut out, &candidates_to_entries(lists, tag)).unwrap();
        String::from_utf8(out).unwrap()
    }

    proptest! {
        #[test]
        fn run_write_is_idempotent(scores in prop::collection::vec(-1e6f64..1e6, 1..30)) {
            let mut scores = scores;
            scores.sort_by(|a, b| b.total_cmp(a));
            let text: String = scores
                .iter()
                .enumerate()
                .map(|(i, s)| format!("q Q0 d{i} {} {s:.9} raw\n", i + 1))
                .collect();
            let once = write_to_string(&run(&text, false).unwrap().queries, "norm");
            let parsed = run(&once, false).unwrap();
            let twice = write_to_string(&parsed.queries, "norm");
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(run(&twice, false).unwrap(), parsed);
        }
    }
}
