use thiserror::Error;

/// Errors raised across the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unbounded problem: {0}")]
    Unbounded(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("entry rule excludes every type in every market")]
    EmptyDataset,

    #[error("identification failure: {0}")]
    Identification(String),

    #[error("insufficient data: need at least {needed} observations, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("deconvolution failure: {0}")]
    Deconvolution(String),

    #[error("inconsistent cell: {0}")]
    Inconsistency(String),

    #[error("rank condition fails (condition number {condition:.3e})")]
    RankCondition { condition: f64 },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("constraint conflict: {0}")]
    ConstraintConflict(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("stage {stage}: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 covers validation problems, 3 identification failures and 4 numeric
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Identification(_)
            | Error::InsufficientData { .. }
            | Error::Deconvolution(_)
            | Error::Inconsistency(_)
            | Error::RankCondition { .. }
            | Error::EmptyDataset => 3,
            Error::Numeric(_)
            | Error::Unbounded(_)
            | Error::Integration(_)
            | Error::OracleFailure(_)
            | Error::ConstraintConflict(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
