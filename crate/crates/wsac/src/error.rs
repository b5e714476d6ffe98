//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, WsacError>;

#[derive(Debug, Error)]
pub enum WsacError {
    /// Array shapes do not line up (wrong number of states/actions, ...).
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// A probability vector failed validation (negative entry, bad sum, ...).
    #[error("invalid distribution: {context}")]
    InvalidDistribution { context: String },

    /// A scalar field is outside its admissible range.
    #[error("invalid configuration: {context}")]
    InvalidConfig { context: String },

    /// The target occupancy puts mass on a state-action pair the behavior
    /// occupancy never visits, so importance weights are undefined there.
    #[error(
        "coverage violation at state {state}, action {action}: \
         target occupancy {target:e} but behavior occupancy is zero"
    )]
    CoverageViolation {
        state: usize,
        action: usize,
        target: f64,
    },

    /// No policy satisfies the cost budget; `min_cost` is the smallest
    /// achievable normalized expected cost (which is > 0).
    #[error("no safe policy exists: minimal achievable expected cost is {min_cost}")]
    Infeasible { min_cost: f64 },

    /// The linear program has unbounded objective (should not happen for
    /// occupancy polytopes; kept as a defensive variant).
    #[error("linear program is unbounded")]
    Unbounded,

    /// The linear system for a value/occupancy solve was singular.
    #[error("singular linear system: {context}")]
    SingularSystem { context: String },

    /// Operations on datasets require at least one transition.
    #[error("dataset is empty")]
    EmptyDataset,

    /// A NaN or infinity showed up where a finite number is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A data file does not match the expected schema.
    #[error("malformed file: {context}")]
    MalformedFile { context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl WsacError {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        WsacError::DimensionMismatch {
            context: context.into(),
        }
    }

    pub(crate) fn dist(context: impl Into<String>) -> Self {
        WsacError::InvalidDistribution {
            context: context.into(),
        }
    }

    pub(crate) fn config(context: impl Into<String>) -> Self {
        WsacError::InvalidConfig {
            context: context.into(),
        }
    }
}
