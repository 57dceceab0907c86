use std::path::PathBuf;

/// Errors surfaced by the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum AstroError {
    /// Input or configuration violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two tensors disagree on shape at a named pipeline stage.
    #[error("shape mismatch in {stage}: expected {expected:?}, got {got:?}")]
    Shape {
        stage: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    /// A data cell could not be interpreted.
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// The training loss became NaN or infinite.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AstroError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        AstroError::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AstroError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            AstroError::Validation(_) | AstroError::Shape { .. } | AstroError::Parse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, AstroError>;
