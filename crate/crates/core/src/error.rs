use thiserror::Error;

/// Invalid domain values or prompt inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InputError {
    #[error("{0} id must not be empty")]
    EmptyId(&'static str),
    #[error("{what} `{id}` has empty text")]
    EmptyText { what: &'static str, id: String },
    #[error("query `{query_id}` has {len} candidates, limit is {max}")]
    TooManyCandidates { query_id: String, len: usize, max: usize },
    #[error("query `{query_id}` lists passage `{passage_id}` more than once")]
    DuplicatePassage { query_id: String, passage_id: String },
    #[error("query `{query_id}`: score increases at position {position}")]
    ScoreOrder { query_id: String, position: usize },
    #[error("truncation limit must be at least 1")]
    InvalidTruncation,
    #[error("template error: {0}")]
    Template(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Failures talking to a comparator backend.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Network-level failure; retried by the HTTP backend before surfacing.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    /// The backend answered but refused the request. Never retried.
    #[error("backend refused request (status {status}): {message}")]
    Refused { status: u16, message: String },
    #[error("backend `{backend}` does not support {capability}")]
    CapabilityMissing {
        backend: String,
        capability: &'static str,
    },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error(transparent)]
    Input(#[from] InputError),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

/// Errors from a ranking strategy. Any error discards the whole query.
#[derive(Debug, Error)]
pub enum RankError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("number of sliding passes must be at least 1")]
    InvalidPasses,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Errors from the line-oriented file parsers.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: negative relevance grade {grade}")]
    NegativeGrade { line: usize, grade: i64 },
    #[error("line {line}: duplicate entry for ({query_id}, {doc_id})")]
    DuplicateKey {
        line: usize,
        query_id: String,
        doc_id: String,
    },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("query `{query_id}`: ranks are not contiguous from 1 (expected {expected}, found {found})")]
    NonContiguousRanks {
        query_id: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: passage `{doc_id}` appears twice for query `{query_id}`")]
    DuplicateDocument {
        line: usize,
        query_id: String,
        doc_id: String,
    },
    #[error("query `{query_id}`: score increases from rank {rank} to rank {next}", next = rank + 1)]
    ScoreOrder { query_id: String, rank: usize },
    #[error("missing passages: {}", .0.join(", "))]
    MissingPassages(Vec<String>),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
