//! Stochastic sub-goal tree policies trained by policy gradient, and the
//! sequential sub-goal baseline.

pub mod estimator;
pub mod ppo;
pub mod toy;
pub mod train;
pub mod tree;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PgError {
    #[error("tree index (i={i}, d={d}) out of range for depth {depth}")]
    IndexOutOfRange { i: usize, d: usize, depth: usize },
    #[error("trajectory has {got} states, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty episode batch")]
    EmptyBatch,
    #[error("non-finite gradient or parameters")]
    NonFiniteGradient,
    #[error("depth {0} is not supported by this policy")]
    BadDepth(usize),
}

pub use estimator::{collect_sgt_batch, pg_gradient, Episode, EpisodeBatch};
pub use ppo::{ppo_surrogate_step, Decision, PpoConfig, PpoState};
pub use train::{train_seq_sg, train_sgt_pg, CurveRow, PgConfig, SeqPolicy};
pub use tree::{log_likelihood_flat, log_likelihood_recursive, predict_subgoals, tree_indices, PredictMode, SgtPolicy};
