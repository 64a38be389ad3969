//! Episode collection and the segment-wise policy-gradient estimator.

use rayon::prelude::*;

use super::tree::{predict_subgoals, segment_return, tree_indices, PredictMode, SgtPolicy};
use super::PgError;
use crate::env2d::{State2D, World2D};
use crate::nn::GaussianNet;
use crate::rng::derive_seed;

/// With-reset costs of consecutive segments and whether all were free.
/// Predicted states outside the unit square are clamped before costing.
pub fn segment_costs(env: &World2D, states: &[State2D]) -> (Vec<f64>, bool) {
    let pts: Vec<State2D> = states.iter().map(|p| p.clamp_unit()).collect();
    let costs = pts.windows(2).map(|w| env.segment_cost(w[0], w[1]).value()).collect();
    let free = pts.windows(2).all(|w| env.segment_free(w[0], w[1]));
    (costs, free)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Index of the `(s, g)` pair the episode was drawn for.
    pub pair: usize,
    pub states: Vec<State2D>,
    pub segment_costs: Vec<f64>,
    pub collision_free: bool,
}

impl Episode {
    pub fn total_cost(&self) -> f64 {
        self.segment_costs.iter().sum()
    }
}

/// `repeats` trajectories for each of `pairs` pairs, all of tree depth `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBatch {
    pub depth: usize,
    pub pairs: usize,
    pub episodes: Vec<Episode>,
}

impl EpisodeBatch {
    pub fn mean_cost(&self) -> f64 {
        self.episodes.iter().map(Episode::total_cost).sum::<f64>() / self.episodes.len() as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.episodes.iter().filter(|e| e.collision_free).count() as f64 / self.episodes.len() as f64
    }
}

pub fn collect_sgt_batch(env: &World2D, policy: &SgtPolicy, pairs: &[(State2D, State2D)], depth: usize, repeats: usize, mode: PredictMode, seed: u64) -> Result<EpisodeBatch, PgError> {
    let episodes = (0..pairs.len() * repeats)
        .into_par_iter()
        .map(|k| {
            let pair = k / repeats;
            let (s, g) = pairs[pair];
            let states = predict_subgoals(policy, s, g, depth, mode, derive_seed(seed, &[pair as u64, (k % repeats) as u64]))?;
            let (segment_costs, collision_free) = segment_costs(env, &states);
            Ok(Episode { pair, states, segment_costs, collision_free })
        })
        .collect::<Result<Vec<_>, PgError>>()?;
    Ok(EpisodeBatch { depth, pairs: pairs.len(), episodes })
}

/// One midpoint choice with its cost-to-go advantage `C^{i,d} - b^{i,d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub s: State2D,
    pub g: State2D,
    pub x: State2D,
    pub advantage: f64,
}

/// All depth-`d` decisions of the batch. The baseline, when enabled, is the
/// mean of `C^{i,d}` over the episodes sharing the pair.
pub fn depth_decisions(batch: &EpisodeBatch, d: usize, use_baseline: bool) -> Result<Vec<Decision>, PgError> {
    if batch.episodes.is_empty() {
        return Err(PgError::EmptyBatch);
    }
    if d == 0 || d > batch.depth {
        return Err(PgError::BadDepth(d));
    }
    let width = 1usize << (batch.depth - d);
    let mut sums = vec![vec![0.0; width]; batch.pairs];
    let mut counts = vec![0usize; batch.pairs];
    for e in &batch.episodes {
        counts[e.pair] += 1;
        for i in 1..=width {
            sums[e.pair][i - 1] += segment_return(&e.segment_costs, i, d);
        }
    }
    let mut out = Vec::with_capacity(batch.episodes.len() * width);
    for e in &batch.episodes {
        for i in 1..=width {
            let (a, m, b) = tree_indices(i, d, batch.depth)?;
            let c = segment_return(&e.segment_costs, i, d);
            let base = if use_baseline { sums[e.pair][i - 1] / counts[e.pair] as f64 } else { 0.0 };
            out.push(Decision { s: e.states[a], g: e.states[b], x: e.states[m], advantage: c - base });
        }
    }
    Ok(out)
}

/// Episode average of `Σ_i (C^{i,d} - b^{i,d}) ∇ log π_d(s_m | s, g)`: an
/// estimate of the gradient of expected cost with respect to `θ_d`.
pub fn pg_gradient(policy: &SgtPolicy, batch: &EpisodeBatch, d: usize, use_baseline: bool) -> Result<Vec<f64>, PgError> {
    let decisions = depth_decisions(batch, d, use_baseline)?;
    let n = batch.episodes.len() as f64;
    Ok(score_sum(policy.net(d), &decisions, 1.0 / n))
}

/// `scale * Σ advantage * ∇ log p(x | s, g)` over `decisions`.
pub fn score_sum(net: &GaussianNet, decisions: &[Decision], scale: f64) -> Vec<f64> {
    decisions
        .par_chunks(64)
        .map(|chunk| {
            let mut g = vec![0.0; GaussianNet::dim()];
            for dc in chunk {
                net.accumulate_grad(dc.s, dc.g, dc.x, scale * dc.advantage, 0.0, &mut g);
            }
            g
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0.0; GaussianNet::dim()], |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        })
}
