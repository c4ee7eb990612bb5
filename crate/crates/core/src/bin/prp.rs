use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use prp::backend::Mode;
use prp::comparator::Prompting;
use prp::config::{BackendKind, ConfigOverrides, ExperimentConfig, StrategyKind};
use prp::harness::{self, GradeProfile, SimulationSpec};
use prp::io::{self, RunOptions};
use prp::strategy::Direction;

#[derive(Parser)]
#[command(name = "prp", version, about = "Pairwise ranking prompts: rerank, evaluate, simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rerank a first-stage run file.
    Rerank(Box<RerankArgs>),
    /// Score a run file against qrels with NDCG.
    Evaluate(EvaluateArgs),
    /// Sweep comparator noise over synthetic queries.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Output run file.
    #[arg(long, short)]
    output: PathBuf,
    /// Relevance judgments, needed by the oracle and noisy backends.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// TOML experiment config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct ConfigFlags {
    #[arg(long)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    k_passes: Option<usize>,
    #[arg(long)]
    direction: Option<Direction>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long, value_parser = parse_prompting)]
    prompting: Option<Prompting>,
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long, env = "PRP_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    flip_prob: Option<f64>,
    #[arg(long)]
    ambiguity_prob: Option<f64>,
    #[arg(long)]
    truncate_chars: Option<usize>,
    #[arg(long)]
    max_inflight: Option<usize>,
    #[arg(long)]
    query_concurrency: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    /// Judgment cache file, created if absent.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    invert_initial: Option<bool>,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict_io: Option<bool>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    ks: Vec<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value = "true")]
    strict_io: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.25,0.5")]
    flip_probs: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    ambiguity_prob: f64,
    #[arg(long, default_value_t = 50)]
    list_size: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "allpair,sorting,sliding")]
    strategies: Vec<StrategyKind>,
    #[arg(long, default_value_t = 10)]
    k_passes: usize,
    #[arg(long, default_value = "backward")]
    direction: Direction,
    #[arg(long, value_parser = parse_mode, default_value = "scoring")]
    mode: Mode,
    /// `graded` (a few highly relevant passages) or `distinct`.
    #[arg(long, default_value = "graded", value_parser = parse_profile)]
    profile: GradeProfile,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
    ks: Vec<usize>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "scoring" => Ok(Mode::Scoring),
        "generation" => Ok(Mode::Generation),
        _ => Err(format!("unknown mode `{s}` (expected scoring or generation)")),
    }
}

fn parse_prompting(s: &str) -> Result<Prompting, String> {
    match s {
        "both" => Ok(Prompting::Both),
        "single" => Ok(Prompting::Single),
        _ => Err(format!("unknown prompting `{s}` (expected both or single)")),
    }
}

fn parse_profile(s: &str) -> Result<GradeProfile, String> {
    match s {
        "graded" => Ok(GradeProfile::Graded),
        "distinct" => Ok(GradeProfile::Distinct),
        _ => Err(format!("unknown grade profile `{s}` (expected graded or distinct)")),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

impl From<ConfigFlags> for ConfigOverrides {
    fn from(f: ConfigFlags) -> Self {
        ConfigOverrides {
            strategy: f.strategy,
            k_passes: f.k_passes,
            direction: f.direction,
            mode: f.mode,
            prompting: f.prompting,
            backend: f.backend,
            endpoint: f.endpoint,
            seed: f.seed,
            flip_prob: f.flip_prob,
            ambiguity_prob: f.ambiguity_prob,
            truncate_chars: f.truncate_chars,
            max_inflight: f.max_inflight,
            query_concurrency: f.query_concurrency,
            depth: f.depth,
            cache: f.cache,
            invert_initial: f.invert_initial,
            tag: f.tag,
            strict_io: f.strict_io,
        }
    }
}

fn rerank(args: RerankArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.apply(args.flags.into());
    config.validate()?;

    let opts = RunOptions {
        strict: config.strict_io,
        ..RunOptions::default()
    };
    let parsed = io::parse_run(open(&args.run)?, opts).with_context(|| format!("in {}", args.run.display()))?;
    let queries = io::parse_queries(open(&args.queries)?).with_context(|| format!("in {}", args.queries.display()))?;
    let corpus = io::parse_corpus(open(&args.corpus)?).with_context(|| format!("in {}", args.corpus.display()))?;
    let qrels = match &args.qrels {
        Some(p) => Some(io::parse_qrels(open(p)?).with_context(|| format!("in {}", p.display()))?),
        None => None,
    };
    let backend = config.build_backend(qrels.as_ref())?;

    let out = harness::rerank(&config, backend, &parsed.queries, &queries, &corpus)?;
    let mut w = BufWriter::new(File::create(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?);
    io::write_run(&mut w, &io::rankings_to_entries(&out.rankings, &out.tag))?;
    w.flush()?;

    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    for line in out.query_lines() {
        writeln!(lock, "{line}")?;
    }
    writeln!(lock, "{}", out.summary_line())?;
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let opts = RunOptions {
        strict: args.strict_io,
        ..RunOptions::default()
    };
    let run = io::parse_run_rankings(open(&args.run)?, opts).with_context(|| format!("in {}", args.run.display()))?;
    let qrels = io::parse_qrels(open(&args.qrels)?).with_context(|| format!("in {}", args.qrels.display()))?;
    let report = harness::evaluate(&run, &qrels, &args.ks)?;
    print!("{}", report.to_tsv());
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let spec = SimulationSpec {
        flip_probs: args.flip_probs,
        ambiguity_prob: args.ambiguity_prob,
        list_size: args.list_size,
        trials: args.trials,
        seed: args.seed,
        strategies: args.strategies,
        k_passes: args.k_passes,
        direction: args.direction,
        mode: args.mode,
        profile: args.profile,
        ks: args.ks,
        ..SimulationSpec::default()
    };
    print!("{}", harness::simulate(&spec)?.to_tsv());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Rerank(a) => rerank(*a),
        Command::Evaluate(a) => evaluate(a),
        Command::Simulate(a) => simulate(a),
    }
}
