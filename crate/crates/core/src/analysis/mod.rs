//! Executable checks of the receiver theory: CM convexity, the equivalence
//! of the CM-weighted and plain covariances, and system capacity and channel
//! identifiability.

mod capacity;
mod convexity;
mod equivalence;

pub use capacity::{
    capacity_bound, identifiability_check, intersection_dim, numerical_rank, CapacityReport, IdentifiabilityReport,
    RANK_REL_TOL,
};
pub use convexity::{cm_cost, convexity_margin, hessian_cm, ConvexityReport};
pub use equivalence::{equivalence_with_beta, rk_equivalence, BlockStatistics, EquivalenceReport, MAX_ENUMERATED_SYMBOLS};

use thiserror::Error;

use crate::complexla::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("{0} symbols are too many to enumerate exactly")]
    TooManySymbols(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
