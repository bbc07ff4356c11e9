use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible shapes or dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A caller-supplied value is outside its valid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quantum object failed its structural invariants (Hermiticity,
    /// positivity, trace, Stiefel residual, ...).
    #[error("invalid quantum object: {0}")]
    Validation(String),

    /// A linear-algebra routine failed in a way that cannot be recovered
    /// (singular system, eigensolver breakdown).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An error raised during an optimization run, tagged with the epoch.
    #[error("epoch {epoch}: {source}")]
    AtEpoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_epoch(self, epoch: usize) -> Error {
        Error::AtEpoch {
            epoch,
            source: Box::new(self),
        }
    }

    /// Strips any epoch tagging and reports whether the root cause is numeric.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) => true,
            Error::AtEpoch { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
