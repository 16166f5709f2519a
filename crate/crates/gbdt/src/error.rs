use thiserror::Error;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("schema mismatch: model expects fingerprint {expected:016x}, got {actual:016x}")]
    SchemaMismatch { expected: u64, actual: u64 },
    #[error("feature count mismatch: expected {expected}, got {actual}")]
    FeatureCount { expected: usize, actual: usize },
    #[error("unsupported model format version {major}.{minor} (reader supports {supported}.x)")]
    Version {
        major: u16,
        minor: u16,
        supported: u16,
    },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
