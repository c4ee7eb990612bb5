//! Experiment configuration: defaults, TOML file, then command-line overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{Backend, HttpBackend, HttpBackendConfig, Mode, NoiseConfig, NoisyBackend, OracleBackend};
use crate::comparator::{ComparatorConfig, Prompting};
use crate::error::InputError;
use crate::metrics::QrelSet;
use crate::strategy::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Allpair,
    Sorting,
    Sliding,
    PointwiseRg,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Allpair => "allpair",
            StrategyKind::Sorting => "sorting",
            StrategyKind::Sliding => "sliding",
            StrategyKind::PointwiseRg => "pointwise-rg",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "allpair" => Ok(Self::Allpair),
            "sorting" | "heapsort" => Ok(Self::Sorting),
            "sliding" => Ok(Self::Sliding),
            "pointwise-rg" | "pointwise" => Ok(Self::PointwiseRg),
            other => Err(format!(
                "unknown strategy `{other}` (expected allpair, sorting, sliding or pointwise-rg)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Oracle,
    Noisy,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(Self::Http),
            "oracle" => Ok(Self::Oracle),
            "noisy" => Ok(Self::Noisy),
            other => Err(format!("unknown backend `{other}` (expected http, oracle or noisy)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub flip_prob: f64,
    pub ambiguity_prob: f64,
    pub seed: u64,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            kind: BackendKind::Oracle,
            endpoint: None,
            flip_prob: 0.0,
            ambiguity_prob: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: StrategyKind,
    /// Number of sliding passes.
    pub k_passes: usize,
    pub direction: Direction,
    pub mode: Mode,
    pub prompting: Prompting,
    pub backend: BackendSpec,
    pub truncate_chars: usize,
    pub max_new_tokens: usize,
    /// Concurrent backend requests per query.
    pub max_inflight: usize,
    /// Queries processed at once.
    pub query_concurrency: usize,
    /// Candidates reranked per query, from the top of the first-stage run.
    pub depth: usize,
    pub cache: Option<PathBuf>,
    pub invert_initial: bool,
    /// Run tag; defaults to one derived from the strategy and config hash.
    pub tag: Option<String>,
    pub strict_io: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cmp = ComparatorConfig::default();
        Self {
            strategy: StrategyKind::Allpair,
            k_passes: 10,
            direction: Direction::Backward,
            mode: cmp.mode,
            prompting: cmp.prompting,
            backend: BackendSpec::default(),
            truncate_chars: cmp.truncate_chars,
            max_new_tokens: cmp.max_new_tokens,
            max_inflight: 8,
            query_concurrency: 4,
            depth: crate::model::DEFAULT_MAX_CANDIDATES,
            cache: None,
            invert_initial: false,
            tag: None,
            strict_io: true,
        }
    }
}

/// Values given on the command line. `None` leaves the file or default value.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub strategy: Option<StrategyKind>,
    pub k_passes: Option<usize>,
    pub direction: Option<Direction>,
    pub mode: Option<Mode>,
    pub prompting: Option<Prompting>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub seed: Option<u64>,
    pub flip_prob: Option<f64>,
    pub ambiguity_prob: Option<f64>,
    pub truncate_chars: Option<usize>,
    pub max_inflight: Option<usize>,
    pub query_concurrency: Option<usize>,
    pub depth: Option<usize>,
    pub cache: Option<PathBuf>,
    pub invert_initial: Option<bool>,
    pub tag: Option<String>,
    pub strict_io: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] InputError),
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: ConfigOverrides) {
        macro_rules! set {
            ($($field:ident).+ <- $value:expr) => {
                if let Some(v) = $value {
                    self.$($field).+ = v;
                }
            };
        }
        set!(strategy <- o.strategy);
        set!(k_passes <- o.k_passes);
        set!(direction <- o.direction);
        set!(mode <- o.mode);
        set!(prompting <- o.prompting);
        set!(backend.kind <- o.backend);
        set!(backend.seed <- o.seed);
        set!(backend.flip_prob <- o.flip_prob);
        set!(backend.ambiguity_prob <- o.ambiguity_prob);
        set!(truncate_chars <- o.truncate_chars);
        set!(max_inflight <- o.max_inflight);
        set!(query_concurrency <- o.query_concurrency);
        set!(depth <- o.depth);
        set!(invert_initial <- o.invert_initial);
        set!(strict_io <- o.strict_io);
        if o.endpoint.is_some() {
            self.backend.endpoint = o.endpoint;
        }
        if o.cache.is_some() {
            self.cache = o.cache;
        }
        if o.tag.is_some() {
            self.tag = o.tag;
        }
    }

    pub fn validate(&self) -> Result<(), InputError> {
        let bad = |m: String| Err(InputError::InvalidParameter(m));
        if self.strategy == StrategyKind::Sliding && self.k_passes == 0 {
            return bad("k_passes must be at least 1 for the sliding strategy".into());
        }
        if self.truncate_chars == 0 {
            return Err(InputError::InvalidTruncation);
        }
        if self.max_inflight == 0 || self.query_concurrency == 0 || self.depth == 0 {
            return bad("max_inflight, query_concurrency and depth must be at least 1".into());
        }
        if self.strategy == StrategyKind::PointwiseRg && self.mode == Mode::Generation {
            return bad("pointwise-rg needs scoring mode".into());
        }
        if let Some(tag) = &self.tag {
            if tag.is_empty() || tag.contains(char::is_whitespace) {
                return bad(format!("tag `{tag}` must be non-empty without whitespace"));
            }
        }
        match self.backend.kind {
            BackendKind::Http if self.backend.endpoint.is_none() => bad("the http backend needs an endpoint".into()),
            BackendKind::Noisy => self.noise().map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn noise(&self) -> Result<NoiseConfig, InputError> {
        NoiseConfig::new(self.backend.flip_prob, self.backend.ambiguity_prob, self.backend.seed)
    }

    pub fn comparator(&self) -> ComparatorConfig {
        ComparatorConfig {
            mode: self.mode,
            prompting: self.prompting,
            truncate_chars: self.truncate_chars,
            max_new_tokens: self.max_new_tokens,
        }
    }

    /// Hash of the effective configuration, excluding the tag.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.tag = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..12].to_string()
    }

    /// Strategy label used in provenance and default tags.
    pub fn strategy_label(&self) -> String {
        match self.strategy {
            StrategyKind::Sliding => format!("sliding-{}-{}", self.k_passes, self.direction.as_str()),
            other => other.as_str().to_string(),
        }
    }

    pub fn effective_tag(&self) -> String {
        self.tag
            .clone()
            .unwrap_or_else(|| format!("prp-{}-{}", self.strategy_label(), self.hash()))
    }

    /// Builds the configured backend. Oracle and noisy backends need qrels.
    pub fn build_backend(&self, qrels: Option<&QrelSet>) -> Result<Arc<dyn Backend>, InputError> {
        let need_qrels = || {
            qrels
                .cloned()
                .ok_or_else(|| InputError::InvalidParameter("oracle and noisy backends need qrels".into()))
        };
        Ok(match self.backend.kind {
            BackendKind::Http => {
                let endpoint = self
                    .backend
                    .endpoint
                    .clone()
                    .ok_or_else(|| InputError::InvalidParameter("the http backend needs an endpoint".into()))?;
                let mut cfg = HttpBackendConfig::new(endpoint);
                cfg.max_inflight = self.max_inflight * self.query_concurrency;
                Arc::new(HttpBackend::new(cfg))
            }
            BackendKind::Oracle => Arc::new(OracleBackend::new(need_qrels()?)),
            BackendKind::Noisy => Arc::new(NoisyBackend::new(need_qrels()?, self.noise()?)),
        })
    }
}
