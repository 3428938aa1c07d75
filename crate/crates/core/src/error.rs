use std::path::PathBuf;

use thiserror::Error;

use crate::config::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid model specification:\n{0}")]
    Validation(ValidationReport),

    #[error("unresolved parameter path `{0}`")]
    UnresolvedPath(String),

    #[error("parameter `{path}` expects a {expected} value")]
    IncompatibleValue { path: String, expected: &'static str },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("transition row `{path}` is not row-stochastic after sampling: {detail}")]
    DegenerateRow { path: String, detail: String },

    #[error("iteration {index}: {source}")]
    Iteration {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rank-deficient regression design ({rows} rows, {columns} basis columns, rank {rank}); increase N or reduce basis")]
    RankDeficient {
        rows: usize,
        columns: usize,
        rank: usize,
    },

    #[error("unknown sampled parameter `{0}`")]
    UnknownParameter(String),

    #[error("analysis requires exactly one intervention and one comparator, found {0} strategies")]
    NotPairwise(usize),

    #[error("equity impact needs at least two subgroups")]
    SingleSubgroup,

    #[error("no equity weight for subgroup `{0}`")]
    MissingWeight(String),

    #[error("baseline health of subgroup `{0}` must be positive")]
    NonPositiveHealth(String),

    #[error("invalid range for `{path}`: {detail}")]
    InvalidRange { path: String, detail: String },

    #[error("budget impact horizon of {years} years exceeds the model horizon of {model_years} years")]
    BiaHorizon { years: u32, model_years: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error("non-finite model output at sample {sample}: {context}")]
    NonFinite { sample: usize, context: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: crate::pipeline::Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
