use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Upstream,
    Remote,
    Integrity,
}

#[derive(Debug, Error)]
pub enum Error {
    // graph validation and evaluation
    #[error("cycle detected through concept `{0}`")]
    CycleDetected(String),
    #[error("edge or equation references unknown concept `{0}`")]
    UnknownParent(String),
    #[error("equation for `{target}` does not match its declared parents: {detail}")]
    EquationParentMismatch { target: String, detail: String },
    #[error("graph declares {0} outcome concepts, expected exactly one")]
    MultipleOutcomes(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("code {code} is out of range for concept `{concept}`")]
    CodeOutOfRange { concept: String, code: i64 },
    #[error("factual value of `{concept}` is {actual}, change expects {expected}")]
    FactualMismatch { concept: String, expected: u32, actual: u32 },
    #[error("exogenous record has no noise entry for `{0}`")]
    IncompleteExogenous(String),
    #[error("invalid concept change: {0}")]
    InvalidChange(String),

    // datasets and assets
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("malformed asset file {path}: {reason}")]
    MalformedAssetFile { path: PathBuf, reason: String },
    #[error("{0} pool is empty")]
    EmptyPool(&'static str),

    // rendering
    #[error("template `{template}` has no slot for concept `{concept}`")]
    MissingSlot { template: String, concept: String },
    #[error("template `{template}` has more than one slot for concept `{concept}`")]
    DuplicateSlot { template: String, concept: String },
    #[error("marker parse failed: {0}")]
    MarkerParse(String),
    #[error("llm decoding requires temperature 0, got {0}")]
    NonZeroTemperature(f64),
    #[error("endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("completion was empty")]
    EmptyCompletion,

    // pipeline
    #[error("example {id}: {source}")]
    Example {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("schema version mismatch: file has {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("graph digest mismatch: file has {found}, expected {expected}")]
    GraphDigestMismatch { found: String, expected: String },
    #[error("corrupt record at {path}:{line}: {reason}")]
    CorruptLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("file digest mismatch for {0}")]
    FileDigestMismatch(PathBuf),

    // adapters
    #[error("no stored entry for text digest {0}")]
    UnknownText(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),

    // explainers
    #[error("no candidate has `{concept}` = {code}")]
    EmptyCandidateSet { concept: String, code: u32 },
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    // evaluation
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("missing counterfactual to endpoint {code} of `{concept}` for example {example}")]
    MissingEndpointCounterfactual {
        example: String,
        concept: String,
        code: u32,
    },
    #[error("missing explanation for example {example}, change {change}")]
    MissingExplanation { example: String, change: String },
    #[error("no changes recorded for concept `{0}`")]
    NoChangesForConcept(String),
    #[error("concept key sets differ")]
    KeyMismatch,
    #[error("empty input set")]
    EmptySet,
    #[error("effect of `{0}` on the outcome is not identifiable: the outcome is its ancestor")]
    NotIdentifiable(String),

    #[error("config: {0}")]
    Config(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn with_example(self, id: &str) -> Self {
        Error::Example {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Example { source, .. } => source.class(),
            EndpointUnreachable(_) | EmptyCompletion | MalformedResponse(_) => ErrorClass::Remote,
            SchemaVersionMismatch { .. }
            | GraphDigestMismatch { .. }
            | FileDigestMismatch(_)
            | CorruptLine { .. } => ErrorClass::Integrity,
            MalformedAssetFile { .. } | Io { .. } | UnknownText(_) | Json(_) | Csv(_) => {
                ErrorClass::Upstream
            }
            MissingExplanation { .. } | MissingEndpointCounterfactual { .. } => {
                ErrorClass::Upstream
            }
            _ => ErrorClass::Config,
        }
    }
}
