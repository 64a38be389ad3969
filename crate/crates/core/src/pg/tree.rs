//! Index arithmetic, sampling and likelihood of depth-`D` sub-goal trees
//! stored as flat state arrays of length `2^D + 1`.

use serde::{Deserialize, Serialize};

use super::PgError;
use crate::env2d::State2D;
use crate::nn::{GaussianNet, MeanPrior};
use crate::rng::rng_from_seed;

/// `(start, mid, goal)` flat indices of segment `i` (1-based) at depth `d`.
pub fn tree_indices(i: usize, d: usize, depth: usize) -> Result<(usize, usize, usize), PgError> {
    if d == 0 || d > depth || i == 0 || i > 1 << (depth - d) {
        return Err(PgError::IndexOutOfRange { i, d, depth });
    }
    Ok(((i - 1) << d, (2 * i - 1) << (d - 1), i << d))
}

/// Every `(i, d)` of a depth-`depth` tree, root first, in the order the
/// midpoints are generated.
pub fn decisions(depth: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=depth).rev().flat_map(move |d| (1..=1usize << (depth - d)).map(move |i| (i, d)))
}

/// Sum of the leaf costs inside segment `i` at depth `d`.
pub fn segment_return(costs: &[f64], i: usize, d: usize) -> f64 {
    costs[(i - 1) << d..i << d].iter().sum()
}

/// One midpoint network per depth; `depth_params[d - 1]` is `π_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgtPolicy {
    pub depth_params: Vec<GaussianNet>,
}

impl SgtPolicy {
    pub fn new(depth: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        SgtPolicy { depth_params: (0..depth).map(|_| GaussianNet::new(MeanPrior::Midpoint, &mut rng)).collect() }
    }

    pub fn depth(&self) -> usize {
        self.depth_params.len()
    }

    pub fn net(&self, d: usize) -> &GaussianNet {
        &self.depth_params[d - 1]
    }

    fn check(&self, depth: usize) -> Result<(), PgError> {
        if depth == 0 || depth > self.depth() {
            return Err(PgError::BadDepth(depth));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    Sample,
    Mean,
    /// Sample at `sample_depth` only; every other depth uses its mean.
    Mixed { sample_depth: usize },
}

/// `[s, ..., g]` with `2^depth - 1` predicted midpoints.
pub fn predict_subgoals(policy: &SgtPolicy, s: State2D, g: State2D, depth: usize, mode: PredictMode, seed: u64) -> Result<Vec<State2D>, PgError> {
    policy.check(depth)?;
    let mut rng = rng_from_seed(seed);
    let mut traj = vec![s; (1 << depth) + 1];
    traj[1 << depth] = g;
    for (i, d) in decisions(depth) {
        let (a, m, b) = tree_indices(i, d, depth)?;
        let net = policy.net(d);
        let sample = match mode {
            PredictMode::Sample => true,
            PredictMode::Mean => false,
            PredictMode::Mixed { sample_depth } => sample_depth == d,
        };
        traj[m] = if sample { net.sample(traj[a], traj[b], &mut rng) } else { net.mean(traj[a], traj[b]) };
    }
    Ok(traj)
}

fn check_len(traj: &[State2D], depth: usize) -> Result<(), PgError> {
    let expected = (1 << depth) + 1;
    if traj.len() != expected {
        return Err(PgError::LengthMismatch { expected, got: traj.len() });
    }
    Ok(())
}

/// Log-likelihood summed depth by depth over the flat index table.
pub fn log_likelihood_flat(policy: &SgtPolicy, traj: &[State2D], depth: usize) -> Result<f64, PgError> {
    policy.check(depth)?;
    check_len(traj, depth)?;
    let mut total = 0.0;
    for d in 1..=depth {
        for i in 1..=1usize << (depth - d) {
            let (a, m, b) = tree_indices(i, d, depth)?;
            total += policy.net(d).log_prob(traj[a], traj[b], traj[m]);
        }
    }
    Ok(total)
}

/// Log-likelihood by recursion on the two halves of each segment.
pub fn log_likelihood_recursive(policy: &SgtPolicy, traj: &[State2D], depth: usize) -> Result<f64, PgError> {
    policy.check(depth)?;
    check_len(traj, depth)?;
    fn rec(policy: &SgtPolicy, seg: &[State2D], d: usize) -> f64 {
        if d == 0 {
            return 0.0;
        }
        let m = seg.len() / 2;
        let here = policy.net(d).log_prob(seg[0], seg[seg.len() - 1], seg[m]);
        here + rec(policy, &seg[..=m], d - 1) + rec(policy, &seg[m..], d - 1)
    }
    Ok(rec(policy, traj, depth))
}

/// Log-likelihood and its gradient with respect to each `θ_d`.
pub fn log_likelihood_grad(policy: &SgtPolicy, traj: &[State2D], depth: usize) -> Result<(f64, Vec<Vec<f64>>), PgError> {
    policy.check(depth)?;
    check_len(traj, depth)?;
    let mut grads = vec![vec![0.0; GaussianNet::dim()]; depth];
    let mut total = 0.0;
    for (i, d) in decisions(depth) {
        let (a, m, b) = tree_indices(i, d, depth)?;
        total += policy.net(d).accumulate_grad(traj[a], traj[b], traj[m], 1.0, 0.0, &mut grads[d - 1]).log_prob;
    }
    Ok((total, grads))
}
