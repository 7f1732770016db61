//! Correlation power analysis: hypotheses, batch and streaming Pearson
//! surfaces, candidate ranking, full-key recovery and correlation evolution.

mod accumulator;
mod align;
mod attack;
mod correlation;
mod hypothesis;

use thiserror::Error;

pub use accumulator::CorrelationAccumulator;
pub use align::{
    apply_shift, estimate_shift, mean_trace, realign, realign_to, realign_with_shifts,
    DEFAULT_REFINE_PASSES,
};
pub use attack::{
    attack, attack_matrix, evolution, evolution_matrix, AttackResult, ByteEvolution,
    EvolutionPoint, EvolutionSeries,
};
pub use correlation::{
    correlate, correlate_matrix, pearson, rank_candidates, rank_of, rank_scores, CandidateScore,
    CorrelationSurface,
};
pub use hypothesis::{build_hypotheses, HypothesisMatrix, CANDIDATES};

#[derive(Debug, Error, PartialEq)]
pub enum CpaError {
    #[error("need at least 2 traces, got {0}")]
    InsufficientData(usize),
    #[error("byte index {0} is out of range 0..16")]
    ByteIndex(usize),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("accumulators target different bytes or models")]
    IncompatibleAccumulators,
    #[error("invalid checkpoints: {0}")]
    Checkpoints(String),
    #[error("reference index {index} is out of range for {len} traces")]
    ReferenceIndex { index: usize, len: usize },
}
