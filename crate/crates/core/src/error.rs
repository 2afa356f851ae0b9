use thiserror::Error;

/// Errors raised anywhere in the offline/online pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutside { x: f64, y: f64 },

    #[error("singular system: factorization broke down at equation {equation}")]
    Singular { equation: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("sample {sample}: {source}")]
    Sample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sample {sample} has an all-zero temporal snapshot matrix")]
    DegenerateSample { sample: usize },

    #[error("observation at T = {time} has a zero {field} field")]
    DegenerateObservation { time: f64, field: &'static str },

    #[error("convergence order undefined: consecutive errors are equal")]
    UndefinedOrder,

    #[error("optimizer failed: {0}")]
    Optimizer(String),

    #[error("ensemble aborted: {failed} of {total} samples failed")]
    EnsembleFailure { failed: usize, total: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_sample(self, sample: usize) -> Self {
        Error::Sample {
            sample,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical kernels rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. }
            | Error::DegenerateSample { .. }
            | Error::DegenerateObservation { .. }
            | Error::UndefinedOrder
            | Error::Optimizer(_)
            | Error::EnsembleFailure { .. } => true,
            Error::Sample { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
