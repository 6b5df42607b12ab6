//! Dynamic sparse training: Erdős–Rényi topology initialization, candidate
//! subset sampling (uniform / gradient-bound / gradient-estimate), the
//! cosine-annealed prune-grow round with baseline growth strategies, and the
//! analytic training-FLOPs model.

mod flops;
mod round;
mod sampling;
mod schedule;
mod topology;

pub use flops::{flops_estimate, FlopsArch, FlopsBreakdown, FlopsLayer};
pub use round::{
    global_grow_prune_round, grow_prune_step, grow_prune_with_candidates, rigl_grow_step,
    set_grow_step, LayerRoundInput, LayerRoundStats, RoundReport, SubsetSample,
};
pub use sampling::{
    build_distribution, sample_candidates, GrowthStrategy, SignVector, UnitDistributions,
};
pub use schedule::{cosine_decay, PruneGrowSchedule};
pub use topology::{
    erdos_renyi_count, erdos_renyi_init, layer_counts, sample_connection_pattern, solve_epsilon,
    SparsityAssignment,
};

use thiserror::Error;

use crate::sparse::SparseError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DstError {
    #[error("infeasible sparsity: {0}")]
    InfeasibleSparsity(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("sign vector has length {got}, effective batch is {want}")]
    SignLength { got: usize, want: usize },
    #[error("strategy {0} cannot run a prune-grow round")]
    StrategyMismatch(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}
