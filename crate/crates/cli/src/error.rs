use std::path::PathBuf;

use collrec_core::pipeline::PipelineError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing artifact {}; run `collrec {producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: &'static str },
    #[error("stale artifact: {0}")]
    Stale(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 is success; 2 configuration, 3 missing or stale artifacts, 4 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } | CliError::Stale(_) => 3,
            CliError::Runtime(_) | CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    collrec_core::marketplace::MarketError,
    collrec_core::embedding::EmbeddingError,
    collrec_core::dataset::DatasetError,
    collrec_core::eval::EvalError,
    collrec_gbdt::GbdtError,
    serde_json::Error
);
