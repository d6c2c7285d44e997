use thiserror::Error;

use crate::spin::ChiMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unphysical state: {0}")]
    UnphysicalState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("invalid model parameter: {0}")]
    InvalidModel(String),

    #[error("integration did not converge: halving dt changed p0 by {delta:.3e} (limit {limit:.1e})")]
    Convergence { delta: f64, limit: f64 },

    #[error("pulse calibration failed: {0}")]
    Calibration(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("fit failed: {0}")]
    Fit(String),

    /// Every restart of the likelihood optimizer failed its physicality check.
    #[error("maximum-likelihood projection failed (best cost {best_cost:.4e}): {reason}")]
    Mle {
        reason: String,
        best: Box<ChiMatrix>,
        best_cost: f64,
    },

    #[error("monte carlo failed: {failed} of {total} replicas did not converge (first failure: {first})")]
    MonteCarlo { failed: usize, total: usize, first: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) => true,
            Error::Context { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
