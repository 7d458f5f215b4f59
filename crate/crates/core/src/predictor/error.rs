use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("series of length {len} is too short for {steps}-step windows")]
    EmptyWindows { len: usize, steps: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("training diverged (non-finite loss) in epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("trace line {line}: {msg}")]
    Trace { line: u64, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PredictorError>;
