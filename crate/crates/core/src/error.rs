use thiserror::Error;

#[derive(Debug, Error)]
pub enum PufError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("shared-key session requires both parties to hold the same key")]
    KeyMismatch,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("requested {requested} keys but the keyspace only has {keyspace}")]
    KeyspaceExceeded { requested: usize, keyspace: usize },
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PufError>;

pub(crate) fn check_width(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(PufError::Dimension { expected, actual });
    }
    Ok(())
}
