use thiserror::Error;

use crate::behavior::Context;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution{}: {reason}", fmt_context(.context))]
    InvalidDistribution { context: Option<Context>, reason: String },

    #[error("behavior must contain each of the 4 contexts exactly once: {0}")]
    IncompleteBehavior(String),

    #[error("invalid hidden-variable model: {0}")]
    InvalidModel(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("simplex did not converge after {iterations} pivots")]
    LpNonConvergence { iterations: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_context(context: &Option<Context>) -> String {
    match context {
        Some(c) => format!(" in context {c}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dist(context: Option<Context>, reason: impl Into<String>) -> Self {
        Error::InvalidDistribution {
            context,
            reason: reason.into(),
        }
    }
}
