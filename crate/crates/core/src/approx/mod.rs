//! Learned value functions for the 2D world: nearest-neighbour regression,
//! fitted doubling recursion, goal-conditioned FQI, a Floyd-Warshall style
//! relaxation, an inverse model, and sub-goal tracking rollouts.

pub mod fitted;
pub mod fqi;
pub mod fw;
pub mod inverse;
pub mod knn;
pub mod rollout;

use crate::env2d::State2D;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApproxError {
    #[error("no training data")]
    EmptyData,
}

/// `(s, g)` concatenated into one feature vector.
#[inline]
pub fn pair_features(s: State2D, g: State2D) -> [f64; 4] {
    [s.x, s.y, g.x, g.y]
}

pub use fitted::{extract_sgt_plan, fitted_sgtdp, FittedConfig, SearchGrid, ValueModelStack};
pub use fqi::{fqi_universal, FqiConfig, GoalSampler, UniversalQ};
pub use fw::{approx_fw, approx_fw_table, prediction_spread, ApproxFwRun};
pub use inverse::{fit_inverse_model, InverseModel};
pub use knn::{knn_classifier, knn_fit, KdTree, KnnClassifier, KnnRegressor};
pub use rollout::{track_subgoals, Controller, RolloutResult};
