use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("cannot resolve `{0}` to a vector")]
    Unresolvable(String),

    #[error("embedding table is empty")]
    EmptyTable,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged at epoch {epoch}, step {step}: {message}")]
    Training {
        epoch: usize,
        step: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }

    /// Short category name, used by the command line tool for its exit status.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } | Error::InvalidInput(_) => "input",
            Error::Contract(_) => "contract",
            Error::NonFiniteGradient { .. } | Error::Training { .. } => "training",
            Error::Parse { .. } => "parse",
            Error::Unresolvable(_) | Error::EmptyTable => "vocabulary",
            Error::Checkpoint(_) | Error::Json(_) => "checkpoint",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "input" => 2,
            "parse" => 3,
            "vocabulary" => 4,
            "checkpoint" => 5,
            "training" => 6,
            "io" => 7,
            _ => 8,
        }
    }
}
