//! The three end-user commands as library functions: rerank a first-stage
//! run, evaluate a run against qrels, and simulate noisy comparators.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backend::{Backend, Mode, NoiseConfig, NoisyBackend};
use crate::cache::JudgmentCache;
use crate::comparator::{ComparatorConfig, PairJudge, PairwiseComparator, Prompting};
use crate::config::{ExperimentConfig, StrategyKind};
use crate::error::{FormatError, InputError, RankError};
use crate::io::Corpus;
use crate::metrics::{evaluate_run, ndcg_at_k, MetricReport, QrelSet};
use crate::model::{invert_candidates, CandidateEntry, CandidateList, Passage, Query, Ranking};
use crate::pointwise::rank_pointwise;
use crate::prompt::PromptTemplates;
use crate::strategy::{bounded_map, rank_allpair, rank_heapsort, rank_sliding_k, CallCounter, Direction};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] InputError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("cannot open judgment cache: {0}")]
    Cache(std::io::Error),
    #[error("{} of {total} queries failed: {}", failures.len(), describe(failures))]
    Queries {
        total: usize,
        failures: Vec<(String, String)>,
    },
}

fn describe(failures: &[(String, String)]) -> String {
    failures.iter().map(|(q, e)| format!("{q} ({e})")).collect::<Vec<_>>().join(", ")
}

/// Runs one strategy on one query's candidates, in their given order.
pub fn rank_query(
    config: &ExperimentConfig,
    backend: &Arc<dyn Backend>,
    judge: &dyn PairJudge,
    q: &Query,
    candidates: &[Passage],
) -> Result<(Ranking, CallCounter), RankError> {
    match config.strategy {
        StrategyKind::Allpair => rank_allpair(q, candidates, judge, config.max_inflight),
        StrategyKind::Sorting => rank_heapsort(q, candidates, judge),
        StrategyKind::Sliding => rank_sliding_k(q, candidates, judge, config.k_passes, config.direction),
        StrategyKind::PointwiseRg => {
            let templates = PromptTemplates::default();
            let (mut r, c) = rank_pointwise(
                q,
                candidates,
                backend.as_ref(),
                &templates,
                config.truncate_chars,
                config.max_inflight,
            )?;
            r.provenance = judge.provenance(&config.strategy_label());
            Ok((r, c))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryStats {
    pub query_id: String,
    pub counter: CallCounter,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct RerankOutput {
    /// In first-stage run order.
    pub rankings: Vec<Ranking>,
    pub per_query: Vec<QueryStats>,
    pub counter: CallCounter,
    pub elapsed: Duration,
    pub tag: String,
}

impl RerankOutput {
    pub fn summary_line(&self) -> String {
        format!(
            "summary\tqueries={}\tunit_calls={}\tpair_comparisons={}\tcache_hits={}\telapsed_ms={}",
            self.rankings.len(),
            self.counter.unit_calls,
            self.counter.pair_comparisons,
            self.counter.cache_hits,
            self.elapsed.as_millis()
        )
    }

    pub fn query_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.per_query.iter().map(|s| {
            format!(
                "query\t{}\tunit_calls={}\tpair_comparisons={}\tcache_hits={}\telapsed_ms={}",
                s.query_id,
                s.counter.unit_calls,
                s.counter.pair_comparisons,
                s.counter.cache_hits,
                s.elapsed.as_millis()
            )
        })
    }
}

/// Reranks every query of a first-stage run. All-or-nothing: if any query
/// fails, no rankings are returned and every failed query is listed.
pub fn rerank(
    config: &ExperimentConfig,
    backend: Arc<dyn Backend>,
    run: &[CandidateList],
    queries: &[Query],
    corpus: &Corpus,
) -> Result<RerankOutput, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let hash = config.hash();
    let mut comparator = PairwiseComparator::new(backend.clone(), config.comparator())
        .map_err(|e| InputError::InvalidParameter(e.to_string()))?
        .with_config_hash(hash);
    if let Some(path) = &config.cache {
        comparator = comparator.with_cache(Arc::new(JudgmentCache::open(path).map_err(HarnessError::Cache)?));
    }

    let by_id: HashMap<&str, &Query> = queries.iter().map(|q| (q.id(), q)).collect();
    let mut jobs = Vec::with_capacity(run.len());
    let mut missing = Vec::new();
    for list in run {
        let top: Vec<CandidateEntry> = list.entries().iter().take(config.depth).cloned().collect();
        let mut list = CandidateList::decoupled(list.query_id(), top)?;
        if config.invert_initial {
            list = invert_candidates(&list);
        }
        let Some(q) = by_id.get(list.query_id()) else {
            return Err(FormatError::Malformed {
                line: 0,
                reason: format!("run references unknown query `{}`", list.query_id()),
            }
            .into());
        };
        match corpus.resolve(&list) {
            Ok(passages) => jobs.push((*q, passages)),
            Err(FormatError::MissingPassages(ids)) => missing.extend(ids),
            Err(e) => return Err(e.into()),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(FormatError::MissingPassages(missing).into());
    }

    let results = bounded_map(&jobs, config.query_concurrency, |(q, passages)| {
        let t = Instant::now();
        let out = rank_query(config, &backend, &comparator, q, passages);
        Ok::<_, std::convert::Infallible>((q.id().to_string(), out, t.elapsed()))
    })
    .unwrap_or_else(|e| match e {});

    let mut rankings = Vec::with_capacity(results.len());
    let mut per_query = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut counter = CallCounter::default();
    for (qid, out, elapsed) in results {
        match out {
            Ok((r, c)) => {
                counter += c;
                per_query.push(QueryStats {
                    query_id: qid,
                    counter: c,
                    elapsed,
                });
                rankings.push(r);
            }
            Err(e) => failures.push((qid, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(HarnessError::Queries {
            total: jobs.len(),
            failures,
        });
    }
    Ok(RerankOutput {
        rankings,
        per_query,
        counter,
        elapsed: start.elapsed(),
        tag: config.effective_tag(),
    })
}

/// NDCG at each cutoff for every run query that has judgments.
pub fn evaluate(run: &[Ranking], qrels: &QrelSet, ks: &[usize]) -> Result<MetricReport, InputError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(InputError::InvalidParameter("cutoffs must be at least 1".into()));
    }
    Ok(evaluate_run(run, qrels, ks))
}

/// How synthetic relevance grades are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradeProfile {
    /// Graded like a dense benchmark query: about 4% grade 3, 10% grade 2,
    /// 20% grade 1, the rest 0.
    Graded,
    /// Grades `0..N`, all distinct.
    Distinct,
}

impl GradeProfile {
    pub fn grades(&self, n: usize) -> Vec<u32> {
        match self {
            GradeProfile::Distinct => (0..n as u32).collect(),
            GradeProfile::Graded => {
                let count = |share: f64| (n as f64 * share).round() as usize;
                let g3 = count(0.04).max(1).min(n);
                let g2 = count(0.10).min(n - g3);
                let g1 = count(0.20).min(n - g3 - g2);
                let mut out = vec![3; g3];
                out.extend(std::iter::repeat_n(2, g2));
                out.extend(std::iter::repeat_n(1, g1));
                out.resize(n, 0);
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub flip_probs: Vec<f64>,
    pub ambiguity_prob: f64,
    pub list_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyKind>,
    pub k_passes: usize,
    pub direction: Direction,
    pub mode: Mode,
    pub prompting: Prompting,
    pub profile: GradeProfile,
    pub ks: Vec<usize>,
    /// Worker threads across trials.
    pub threads: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            flip_probs: vec![0.0, 0.1, 0.25, 0.5],
            ambiguity_prob: 0.0,
            list_size: 50,
            trials: 200,
            seed: 0,
            strategies: vec![StrategyKind::Allpair, StrategyKind::Sorting, StrategyKind::Sliding],
            k_passes: 10,
            direction: Direction::Backward,
            mode: Mode::Scoring,
            prompting: Prompting::Both,
            profile: GradeProfile::Graded,
            ks: vec![1, 5, 10],
            threads: std::thread::available_parallelism().map_or(4, usize::from),
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), InputError> {
        let bad = |m: &str| Err(InputError::InvalidParameter(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.list_size == 0 {
            return bad("list size must be at least 1");
        }
        if self.flip_probs.is_empty() {
            return bad("the sweep needs at least one flip probability");
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is needed");
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return bad("cutoffs must be at least 1");
        }
        if self.k_passes == 0 {
            return bad("k_passes must be at least 1");
        }
        for &f in &self.flip_probs {
            NoiseConfig::new(f, self.ambiguity_prob, 0)?;
        }
        Ok(())
    }
}

/// Mean and standard error of NDCG at each cutoff for one table row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRow {
    pub strategy: String,
    /// `None` for the random-permutation baseline.
    pub flip_prob: Option<f64>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTable {
    pub ks: Vec<usize>,
    pub ambiguity_prob: f64,
    pub rows: Vec<SimulationRow>,
}

impl SimulationTable {
    pub fn row(&self, strategy: &str, flip_prob: f64) -> Option<&SimulationRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.flip_prob == Some(flip_prob))
    }

    pub fn baseline(&self) -> Option<&SimulationRow> {
        self.rows.iter().find(|r| r.flip_prob.is_none())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("strategy\tflip_prob\tambiguity_prob");
        for k in &self.ks {
            out.push_str(&format!("\tndcg@{k}\tse@{k}"));
        }
        out.push('\n');
        for r in &self.rows {
            let flip = r.flip_prob.map_or("-".to_string(), |f| f.to_string());
            out.push_str(&format!("{}\t{}\t{}", r.strategy, flip, self.ambiguity_prob));
            for (m, s) in r.mean.iter().zip(&r.std_err) {
                out.push_str(&format!("\t{m:.4}\t{s:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A synthetic query with known grades, its candidates in a random initial
/// order.
struct Trial {
    query: Query,
    candidates: Vec<Passage>,
    judged: Vec<u32>,
    grade_of: HashMap<String, u32>,
}

fn make_trial(spec: &SimulationSpec, t: usize) -> Trial {
    let grades = spec.profile.grades(spec.list_size);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..spec.list_size).collect();
    order.shuffle(&mut rng);
    let qid = format!("sim{t}");
    let query = Query::new(qid.clone(), format!("synthetic query {t}")).expect("non-empty");
    let candidates = order
        .iter()
        .map(|i| Passage::new(format!("{qid}-p{i}"), format!("synthetic passage {i}")).expect("non-empty"))
        .collect();
    let grade_of = (0..spec.list_size).map(|i| (format!("{qid}-p{i}"), grades[i])).collect();
    Trial {
        query,
        candidates,
        judged: grades,
        grade_of,
    }
}

/// Sweeps comparator noise over synthetic queries and reports NDCG for each
/// strategy and noise level, plus the random-permutation baseline (the
/// initial orders themselves). Deterministic given the seed: each trial's
/// query and the noise draws depend only on the seed and trial index.
pub fn simulate(spec: &SimulationSpec) -> Result<SimulationTable, HarnessError> {
    spec.validate()?;
    let trials: Vec<Trial> = (0..spec.trials).map(|t| make_trial(spec, t)).collect();
    let mut qrels = QrelSet::new();
    for t in &trials {
        for (id, g) in &t.grade_of {
            qrels.insert(t.query.id(), id.clone(), *g);
        }
    }
    let backend_seed = spec.seed.wrapping_add(0x5EED);
    let cmp_config = ComparatorConfig {
        mode: spec.mode,
        prompting: spec.prompting,
        ..ComparatorConfig::default()
    };
    let exp = ExperimentConfig {
        k_passes: spec.k_passes,
        direction: spec.direction,
        mode: spec.mode,
        prompting: spec.prompting,
        max_inflight: 1,
        ..ExperimentConfig::default()
    };

    let ndcgs = |order: &[String], t: &Trial| -> Vec<f64> {
        let run: Vec<u32> = order.iter().map(|id| t.grade_of[id]).collect();
        spec.ks.iter().map(|&k| ndcg_at_k(&run, &t.judged, k)).collect()
    };
    let summarize = |per_trial: &[Vec<f64>]| -> (Vec<f64>, Vec<f64>) {
        (0..spec.ks.len())
            .map(|i| mean_se(&per_trial.iter().map(|v| v[i]).collect::<Vec<_>>()))
            .unzip()
    };

    let mut rows = Vec::new();
    for &flip in &spec.flip_probs {
        let noise = NoiseConfig::new(flip, spec.ambiguity_prob, backend_seed)?;
        let backend: Arc<dyn Backend> = Arc::new(NoisyBackend::new(qrels.clone(), noise));
        let comparator = PairwiseComparator::new(backend.clone(), cmp_config)
            .map_err(|e| InputError::InvalidParameter(e.to_string()))?;
        for &strategy in &spec.strategies {
            let exp = ExperimentConfig { strategy, ..exp.clone() };
            let per_trial = bounded_map(&trials, spec.threads, |t| {
                rank_query(&exp, &backend, &comparator, &t.query, &t.candidates)
                    .map(|(r, _)| ndcgs(&r.ordered_passage_ids, t))
                    .map_err(|e| (t.query.id().to_string(), e.to_string()))
            })
            .map_err(|f| HarnessError::Queries {
                total: trials.len(),
                failures: vec![f],
            })?;
            let (mean, std_err) = summarize(&per_trial);
            rows.push(SimulationRow {
                strategy: exp.strategy_label(),
                flip_prob: Some(flip),
                mean,
                std_err,
            });
        }
    }
    let random: Vec<Vec<f64>> = trials
        .iter()
        .map(|t| {
            let ids: Vec<String> = t.candidates.iter().map(|p| p.id().to_string()).collect();
            ndcgs(&ids, t)
        })
        .collect();
    let (mean, std_err) = summarize(&random);
    rows.push(SimulationRow {
        strategy: "random".into(),
        flip_prob: None,
        mean,
        std_err,
    });
    Ok(SimulationTable {
        ks: spec.ks.clone(),
        ambiguity_prob: spec.ambiguity_prob,
        rows,
    })
}
