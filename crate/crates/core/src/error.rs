use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("split plan error: {0}")]
    Plan(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite loss at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("fit failed for lambda = {lambda}: {source}")]
    Tuning {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("rank deficient design: column `{column}` is a linear combination of [{}]", depends_on.join(", "))]
    RankDeficient {
        column: String,
        depends_on: Vec<String>,
    },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("unidentifiable model: {0}")]
    Unidentifiable(String),

    #[error("R² is undefined: {0}")]
    UndefinedR2(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 = usage, 3 = data or format, 4 = numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::NonFinite { .. }
            | Error::RankDeficient { .. }
            | Error::Unidentifiable(_)
            | Error::UndefinedR2(_)
            | Error::Estimation(_) => 4,
            Error::Tuning { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
