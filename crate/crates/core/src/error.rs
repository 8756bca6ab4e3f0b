use std::path::PathBuf;

use crate::corpus::{Label, Split};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: unknown label value `{value}`", path.display())]
    Label {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("count mismatch for {split}/{label}: manifest expects {expected}, found {actual}")]
    CountMismatch {
        split: Split,
        label: Label,
        expected: usize,
        actual: usize,
    },

    #[error("id `{0}` appears in both the train and test splits")]
    DuplicateId(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("shape error in `{branch}` branch: {message}")]
    Shape { branch: String, message: String },

    #[error("token index {index} out of range for embedding table with {rows} rows")]
    Index { index: usize, rows: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("failed to load {what} from {}: {message}", path.display())]
    Load {
        what: String,
        path: PathBuf,
        message: String,
    },

    #[error("training diverged at epoch {epoch}, step {step} (loss = {loss})")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("prediction coverage error: missing ids {missing:?}, surplus ids {surplus:?}")]
    Coverage {
        missing: Vec<String>,
        surplus: Vec<String>,
    },

    #[error("checkpoint incompatible with configuration: {0}")]
    Compatibility(String),

    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("tokenizer error: {0}")]
    Tokenizer(String),

    #[error(transparent)]
    Candle(#[from] candle_core::Error),

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

    pub(crate) fn load(what: impl Into<String>, path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Load {
            what: what.into(),
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end: 2 for usage and
    /// validation failures, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Label { .. }
            | Error::CountMismatch { .. }
            | Error::DuplicateId(_)
            | Error::EmptyCorpus(_)
            | Error::Format { .. }
            | Error::Coverage { .. }
            | Error::Config { .. } => 2,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 1,
        }
    }
}
