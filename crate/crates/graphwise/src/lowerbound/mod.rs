//! Dividers, packing and buffer entropies, divider statistics, and the
//! chi-square risk lower bounds with the signal thresholds they imply.

use thiserror::Error;

use crate::graphs::GraphError;
use crate::model::ModelError;

mod buffer;
mod chi2;
mod divider;
mod packing;
mod stats;
mod threshold;

pub use buffer::{buffer_entropy, BufferEntropy, BufferMethod, DEFAULT_MC_DRAWS, EXACT_BUFFER_LIMIT};
pub use chi2::{
    cancellation_gap, multi_edge_chi2_bound, predistance_histogram, single_edge_chi2_bound, BoundSetting,
    MULTI_EDGE_PAIR_LIMIT,
};
pub use divider::{BufferRule, Divider, DividerMode, SubsetShape};
pub(crate) use divider::{binomial, unrank_subset};
pub use packing::{greedy_packing, packing_entropy, Packing, EXACT_PACKING_LIMIT, GREEDY_PACKING_LIMIT};
pub use stats::{divider_stats, DividerStats, EXACT_STATS_LIMIT};
pub use threshold::{threshold_report, threshold_report_for, Theorem, ThresholdReport, ThresholdTerm};

#[derive(Debug, Error)]
pub enum LowerBoundError {
    #[error("invalid divider: {0}")]
    InvalidDivider(String),
    #[error("divider is empty")]
    EmptyDivider,
    #[error("operation needs a single-edge divider")]
    NotSingleEdge,
    #[error("{what}: divider has {len} sets, limit is {limit}")]
    TooLarge { what: &'static str, len: usize, limit: usize },
    #[error("theta {theta} violates the precondition theta <= {limit}")]
    ThetaTooLarge { theta: f64, limit: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, LowerBoundError>;
