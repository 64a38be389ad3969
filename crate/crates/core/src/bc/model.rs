//! Maximum-likelihood Gaussian models of expert midpoints and next states.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::expert::ExpertDataset;
use super::BcError;
use crate::env2d::{State2D, World2D};
use crate::nn::{GaussianNet, MeanPrior};
use crate::optim::Adam;
use crate::pg::estimator::segment_costs;
use crate::pg::tree::PredictMode;
use crate::rng::{derive_rng, derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig { steps: 50_000, batch_size: 64, lr: 1e-3 }
    }
}

/// One network shared by every depth (midpoints) or step (next states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcModel {
    pub net: GaussianNet,
}

/// Midpoint index of the demonstration slice `a..=b`.
pub fn mid_index(a: usize, b: usize) -> usize {
    (a + b) / 2
}

fn check(data: &ExpertDataset) -> Result<(), BcError> {
    if data.trajectories.is_empty() {
        return Err(BcError::EmptyData);
    }
    if let Some(i) = data.trajectories.iter().position(|t| t.len() < 2) {
        return Err(BcError::ShortTrajectory(i));
    }
    Ok(())
}

/// Minimises the mean negative log-likelihood of `(s, g) -> target`
/// examples drawn fresh for every step. Returns the model and the loss of
/// each step's batch before its update.
fn fit<F>(prior: MeanPrior, cfg: &BcConfig, seed: u64, mut draw: F) -> (BcModel, Vec<f64>)
where
    F: FnMut(&mut crate::rng::Rng) -> (State2D, State2D, State2D),
{
    let mut net = GaussianNet::new(prior, &mut rng_from_seed(derive_seed(seed, &[0])));
    let mut opt = Adam::new(GaussianNet::dim(), cfg.lr);
    let mut losses = Vec::with_capacity(cfg.steps);
    let w = -1.0 / cfg.batch_size as f64;
    for step in 0..cfg.steps {
        let mut rng = derive_rng(seed, &[1, step as u64]);
        let mut grad = vec![0.0; GaussianNet::dim()];
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            let (s, g, x) = draw(&mut rng);
            loss += w * net.accumulate_grad(s, g, x, w, 0.0, &mut grad).log_prob;
        }
        losses.push(loss);
        opt.step(&mut net.params, &grad);
    }
    (BcModel { net }, losses)
}

/// Two distinct indices of `0..len`, ordered.
fn ordered_pair<R: Rng + ?Sized>(len: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.gen_range(0..len);
    let mut j = rng.gen_range(0..len - 1);
    if j >= i {
        j += 1;
    }
    (i.min(j), i.max(j))
}

/// Fits `p(s_mid | s_a, s_b)` on random sub-slices of the demonstrations.
pub fn bc_train_sgt(data: &ExpertDataset, cfg: &BcConfig, seed: u64) -> Result<(BcModel, Vec<f64>), BcError> {
    check(data)?;
    let t = &data.trajectories;
    Ok(fit(MeanPrior::Midpoint, cfg, seed, |rng| {
        let tau = &t[rng.gen_range(0..t.len())];
        let (a, b) = ordered_pair(tau.len(), rng);
        (tau[a], tau[b], tau[mid_index(a, b)])
    }))
}

/// Fits `p(s_{t+1} | s_t, g)` with `g` the demonstration's last state.
pub fn bc_train_sequential(data: &ExpertDataset, cfg: &BcConfig, seed: u64) -> Result<(BcModel, Vec<f64>), BcError> {
    check(data)?;
    let t = &data.trajectories;
    Ok(fit(MeanPrior::Current, cfg, seed, |rng| {
        let tau = &t[rng.gen_range(0..t.len())];
        let i = rng.gen_range(0..tau.len() - 1);
        (tau[i], *tau.last().unwrap(), tau[i + 1])
    }))
}

/// `[s, 2^K - 1 midpoints, g]` in path order, and the number of model calls.
/// Sibling subtrees are predicted in parallel; each node samples from its
/// own stream so the result does not depend on scheduling.
pub fn bc_predict_sgt(model: &BcModel, s: State2D, g: State2D, depth: usize, mode: PredictMode, seed: u64) -> (Vec<State2D>, usize) {
    let calls = AtomicUsize::new(0);
    let mut out = vec![s];
    out.extend(predict_rec(model, s, g, depth, 1, mode, seed, &calls));
    out.push(g);
    (out, calls.into_inner())
}

fn predict_rec(model: &BcModel, a: State2D, b: State2D, k: usize, node: u64, mode: PredictMode, seed: u64, calls: &AtomicUsize) -> Vec<State2D> {
    if k == 0 {
        return Vec::new();
    }
    calls.fetch_add(1, Ordering::Relaxed);
    let sample = match mode {
        PredictMode::Sample => true,
        PredictMode::Mean => false,
        PredictMode::Mixed { sample_depth } => sample_depth == k,
    };
    let m = if sample { model.net.sample(a, b, &mut derive_rng(seed, &[node])) } else { model.net.mean(a, b) };
    let (mut left, right) = rayon::join(
        || predict_rec(model, a, m, k - 1, 2 * node, mode, seed, calls),
        || predict_rec(model, m, b, k - 1, 2 * node + 1, mode, seed, calls),
    );
    left.push(m);
    left.extend(right);
    left
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqRollout {
    pub states: Vec<State2D>,
    pub calls: usize,
    pub reached: bool,
    pub collision_free: bool,
    pub final_distance: f64,
}

/// Applies the mean next-state prediction until within `threshold` of `g`
/// or `max_steps` calls.
pub fn rollout_sequential(model: &BcModel, env: &World2D, s: State2D, g: State2D, threshold: f64, max_steps: usize) -> SeqRollout {
    let mut states = vec![s];
    let mut cur = s;
    while cur.dist(g) > threshold && states.len() - 1 < max_steps {
        cur = model.net.mean(cur, g);
        states.push(cur);
    }
    let calls = states.len() - 1;
    let collision_free = segment_costs(env, &states).1;
    SeqRollout { final_distance: cur.dist(g), reached: cur.dist(g) <= threshold, collision_free, calls, states }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMethod {
    Sgt,
    Seq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcRow {
    pub method: BcMethod,
    pub pair_id: usize,
    pub success: bool,
    pub model_calls: usize,
    pub final_distance: f64,
}

/// Mean-mode predictions on each pair. A tree succeeds when the polyline
/// through its sub-goals is collision free; a rollout must also reach the
/// goal threshold.
pub fn evaluate_bc(env: &World2D, model: &BcModel, method: BcMethod, pairs: &[(State2D, State2D)], depth: usize, max_steps: usize) -> Vec<BcRow> {
    pairs
        .iter()
        .enumerate()
        .map(|(pair_id, &(s, g))| match method {
            BcMethod::Sgt => {
                let (t, calls) = bc_predict_sgt(model, s, g, depth, PredictMode::Mean, 0);
                BcRow { method, pair_id, success: segment_costs(env, &t).1, model_calls: calls, final_distance: 0.0 }
            }
            BcMethod::Seq => {
                let r = rollout_sequential(model, env, s, g, env.goal_threshold, max_steps);
                BcRow { method, pair_id, success: r.reached && r.collision_free, model_calls: r.calls, final_distance: r.final_distance }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env2d::builtin_world;

    #[test]
    fn midpoint_index_is_balanced() {
        for a in 0..30 {
            for b in a + 1..31 {
                let m = mid_index(a, b);
                assert!(a <= m && m < b);
                assert!(((m - a) as i64 - (b - m) as i64).abs() <= 1);
            }
        }
        assert_eq!(mid_index(4, 5), 4);
    }

    #[test]
    fn depth_zero_and_call_counts() {
        let model = BcModel { net: GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(0)) };
        let (s, g) = (State2D::new(0.1, 0.1), State2D::new(0.9, 0.3));
        assert_eq!(bc_predict_sgt(&model, s, g, 0, PredictMode::Mean, 0), (vec![s, g], 0));
        for k in 1..=6 {
            let (t, calls) = bc_predict_sgt(&model, s, g, k, PredictMode::Sample, 5);
            assert_eq!(t.len(), (1 << k) + 1);
            assert_eq!(calls, (1 << k) - 1);
            assert_eq!(t, bc_predict_sgt(&model, s, g, k, PredictMode::Sample, 5).0);
        }
    }

    #[test]
    fn step_cap_is_a_failure() {
        let env = builtin_world("empty").unwrap();
        let model = BcModel { net: GaussianNet::new(MeanPrior::Current, &mut rng_from_seed(0)) };
        let (s, g) = (State2D::new(0.1, 0.1), State2D::new(0.9, 0.9));
        let r = rollout_sequential(&model, &env, s, g, 0.15, 10);
        assert_eq!(r.calls, 10);
        assert!(!r.reached);
        assert!((r.final_distance - s.dist(g)).abs() < 1e-12);
    }

    #[test]
    fn empty_and_short_data_rejected() {
        let cfg = BcConfig::default();
        assert!(matches!(bc_train_sgt(&ExpertDataset::default(), &cfg, 0), Err(BcError::EmptyData)));
        let one = ExpertDataset { trajectories: vec![vec![State2D::new(0.5, 0.5)]] };
        assert!(matches!(bc_train_sequential(&one, &cfg, 0), Err(BcError::ShortTrajectory(0))));
    }
}
