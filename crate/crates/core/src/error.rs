use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // ingestion and log validation
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: invalid `{field}`: {reason}")]
    InvalidField {
        line: usize,
        field: String,
        reason: String,
    },
    #[error("line {line}: duplicate record for model `{model_id}`, query `{query_id}`")]
    DuplicatePair {
        line: usize,
        model_id: String,
        query_id: String,
    },
    #[error("log is not dense: {} missing (model, query) pairs, first: ({}, {})",
        missing.len(), missing[0].0, missing[0].1)]
    NonDense { missing: Vec<(String, String)> },
    #[error("log contains no records")]
    EmptyLog,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("model `{model_id}` has no confidence for query `{query_id}`")]
    MissingConfidence { model_id: String, query_id: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),

    // configuration of systems and scenarios
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid price `{input}`: {reason}")]
    InvalidPrice { input: String, reason: String },
    #[error("invalid cascade: {0}")]
    InvalidCascade(String),
    #[error("invalid threshold {value} at stage {stage}: must lie in [0, 1]")]
    InvalidThreshold { stage: usize, value: f64 },
    #[error("invalid router: {0}")]
    InvalidRouter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid model profile: {0}")]
    InvalidProfile(String),
    #[error("invalid probability inputs: {0}")]
    InvalidProbability(String),

    // computation
    #[error("scenario prices `{0}` but an outcome does not report it")]
    PricedMetricMissing(String),
    #[error("no outcomes to aggregate")]
    EmptyOutcomes,
    #[error("plot transform undefined for non-negative reward {0}")]
    UndefinedTransform(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least {required} observations required, got {got}")]
    TooFewObservations { required: usize, got: usize },
    #[error("threshold grid has {size} combinations, limit is {limit}")]
    GridTooLarge { size: u128, limit: u128 },
    #[error("systems `{0}` and `{1}` have equal error rates and equal costs")]
    IndistinguishableSystems(String, String),
    #[error("non-positive price coordinate {index} in lambda sample {sample}")]
    NonPositiveLambda { sample: usize, index: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// Broad origin of an error, used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad scenario, system, grid or profile definitions, or unreadable files.
    Config,
    /// Malformed or inconsistent evaluation data.
    Data,
    /// A computation failed on otherwise valid inputs.
    Computation,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Malformed { .. }
            | Error::MissingField { .. }
            | Error::InvalidField { .. }
            | Error::DuplicatePair { .. }
            | Error::NonDense { .. }
            | Error::EmptyLog
            | Error::UnknownModel(_)
            | Error::UnknownQuery(_)
            | Error::MissingConfidence { .. } => ErrorKind::Data,
            Error::InvalidSplit(_)
            | Error::InvalidScenario(_)
            | Error::InvalidPrice { .. }
            | Error::InvalidCascade(_)
            | Error::InvalidThreshold { .. }
            | Error::InvalidRouter(_)
            | Error::InvalidGrid(_)
            | Error::InvalidProfile(_)
            | Error::InvalidProbability(_)
            | Error::Io(_) => ErrorKind::Config,
            _ => ErrorKind::Computation,
        }
    }
}
