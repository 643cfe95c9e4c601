use thiserror::Error;

/// Errors produced by the estimation pipeline and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("eigendecomposition did not converge within {iterations} iterations")]
    EigenDidNotConverge { iterations: usize },

    #[error("nodewise column {index}: noise level {tau_sq:.3e} at or below floor {floor:.1e}; the eigenvalue-gap condition likely fails")]
    DegenerateColumn {
        index: usize,
        tau_sq: f64,
        floor: f64,
    },

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
