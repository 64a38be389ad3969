//! Depth-by-depth training of sub-goal tree policies and the sequential
//! sub-goal baseline, plus their evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimator::{collect_sgt_batch, depth_decisions, segment_costs, Decision};
use super::ppo::{ppo_surrogate_step, with_old_log_probs, PpoConfig, PpoState};
use super::tree::{predict_subgoals, PredictMode, SgtPolicy};
use super::PgError;
use crate::env2d::{State2D, World2D};
use crate::nn::{GaussianNet, MeanPrior};
use crate::rng::{derive_rng, derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgConfig {
    pub depth: usize,
    /// Start/goal pairs per cycle.
    pub episodes_per_cycle: usize,
    /// Trajectories per pair; their mean cost is the baseline.
    pub repeats: usize,
    /// Cycle cap per trained depth.
    pub max_cycles: usize,
    /// Stop a depth once the mean cost has not improved by
    /// `min_improvement` (relative) for this many cycles.
    pub patience: usize,
    pub min_improvement: f64,
    /// Fixed pairs whose mean-mode cost drives the curve and the stopping rule.
    pub monitor_pairs: usize,
    pub ppo: PpoConfig,
}

impl Default for PgConfig {
    fn default() -> Self {
        PgConfig { depth: 2, episodes_per_cycle: 30, repeats: 10, max_cycles: 500, patience: 20, min_improvement: 0.01, monitor_pairs: 100, ppo: PpoConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub cycle: usize,
    pub depth_being_trained: usize,
    pub mean_cost: f64,
    pub success_rate: f64,
}

struct Patience {
    best: f64,
    since: usize,
    patience: usize,
    min_improvement: f64,
}

impl Patience {
    fn new(patience: usize, min_improvement: f64) -> Self {
        Patience { best: f64::INFINITY, since: 0, patience, min_improvement }
    }

    /// Records one cycle's cost; true once training should stop.
    fn update(&mut self, cost: f64) -> bool {
        if self.best.is_infinite() || cost < self.best * (1.0 - self.min_improvement) {
            self.best = cost;
            self.since = 0;
        } else {
            self.since += 1;
            self.best = self.best.min(cost);
        }
        self.since >= self.patience
    }
}

/// Parameters with the lowest monitor cost seen so far; earlier wins ties.
struct Best {
    cost: f64,
    net: GaussianNet,
}

impl Best {
    fn new(cost: f64, net: &GaussianNet) -> Self {
        Best { cost, net: net.clone() }
    }

    fn offer(&mut self, cost: f64, net: &GaussianNet) {
        if cost < self.cost {
            self.cost = cost;
            self.net = net.clone();
        }
    }
}

fn training_pairs(env: &World2D, count: usize, seed: u64) -> Vec<(State2D, State2D)> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| env.sample_start_goal(&mut rng)).collect()
}

fn monitor(rows: &[EvalRow]) -> (f64, f64) {
    let n = rows.len().max(1) as f64;
    (rows.iter().map(|r| r.cost).sum::<f64>() / n, success_rate(rows))
}

/// Trains `π_1`, then `π_2` initialised from `π_1`, and so on. While `π_d`
/// trains, trees have depth `d`, only the root is sampled and all lower
/// depths use their frozen means. Each depth keeps the parameters with the
/// lowest monitor cost, including the ones it started from.
pub fn train_sgt_pg(env: &World2D, cfg: &PgConfig, seed: u64) -> Result<(SgtPolicy, Vec<CurveRow>), PgError> {
    let mut policy = SgtPolicy::new(cfg.depth, derive_seed(seed, &[0]));
    let watch = training_pairs(env, cfg.monitor_pairs, derive_seed(seed, &[3]));
    let mut curve = Vec::new();
    for d in 1..=cfg.depth {
        if d > 1 {
            policy.depth_params[d - 1] = policy.depth_params[d - 2].clone();
        }
        let mut state = PpoState::new(cfg.ppo.lr);
        let mut stop = Patience::new(cfg.patience, cfg.min_improvement);
        let mut best = Best::new(monitor(&evaluate_sgt(env, &policy, d, &watch)?).0, policy.net(d));
        for c in 0..cfg.max_cycles {
            let pairs = training_pairs(env, cfg.episodes_per_cycle, derive_seed(seed, &[1, d as u64, c as u64]));
            let batch = collect_sgt_batch(env, &policy, &pairs, d, cfg.repeats, PredictMode::Mixed { sample_depth: d }, derive_seed(seed, &[2, d as u64, c as u64]))?;
            let old = with_old_log_probs(policy.net(d), &depth_decisions(&batch, d, true)?);
            for _ in 0..cfg.ppo.epochs {
                ppo_surrogate_step(&mut policy.depth_params[d - 1], &old, &cfg.ppo, &mut state)?;
            }
            let (mean_cost, success_rate) = monitor(&evaluate_sgt(env, &policy, d, &watch)?);
            curve.push(CurveRow { cycle: curve.len(), depth_being_trained: d, mean_cost, success_rate });
            best.offer(mean_cost, policy.net(d));
            if stop.update(mean_cost) {
                break;
            }
        }
        policy.depth_params[d - 1] = best.net;
    }
    Ok((policy, curve))
}

/// One network proposing the next sub-goal from `(current, goal)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqPolicy {
    pub net: GaussianNet,
}

impl SeqPolicy {
    pub fn new(seed: u64) -> Self {
        SeqPolicy { net: GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(seed)) }
    }

    /// `[s, w_1, ..., w_n, g]`.
    pub fn predict(&self, s: State2D, g: State2D, n_subgoals: usize, sample: bool, seed: u64) -> Vec<State2D> {
        let mut rng = rng_from_seed(seed);
        let mut out = Vec::with_capacity(n_subgoals + 2);
        out.push(s);
        for _ in 0..n_subgoals {
            let cur = *out.last().unwrap();
            out.push(if sample { self.net.sample(cur, g, &mut rng) } else { self.net.mean(cur, g) });
        }
        out.push(g);
        out
    }
}

/// Depth a tree needs to place at least `n_subgoals` midpoints.
fn budget_depth(n_subgoals: usize) -> usize {
    let mut d = 0;
    while (1usize << d) - 1 < n_subgoals {
        d += 1;
    }
    d.max(1)
}

/// Sequential baseline. Decision `t` is credited with the cost of every
/// segment from `w_{t-1}` on, minus the pair mean of that quantity. The
/// cycle budget matches a tree with as many sub-goals. The returned network is
/// the one with the lowest monitor cost.
pub fn train_seq_sg(env: &World2D, n_subgoals: usize, cfg: &PgConfig, seed: u64) -> Result<(SeqPolicy, Vec<CurveRow>), PgError> {
    let mut policy = SeqPolicy::new(derive_seed(seed, &[0]));
    let watch = training_pairs(env, cfg.monitor_pairs, derive_seed(seed, &[3]));
    let mut state = PpoState::new(cfg.ppo.lr);
    let mut stop = Patience::new(cfg.patience, cfg.min_improvement);
    let mut best = Best::new(monitor(&evaluate_seq(env, &policy, n_subgoals, &watch)).0, &policy.net);
    let mut curve = Vec::new();
    for c in 0..cfg.max_cycles * budget_depth(n_subgoals) {
        let pairs = training_pairs(env, cfg.episodes_per_cycle, derive_seed(seed, &[1, c as u64]));
        let episodes: Vec<(usize, Vec<State2D>, Vec<f64>)> = (0..pairs.len() * cfg.repeats)
            .into_par_iter()
            .map(|k| {
                let p = k / cfg.repeats;
                let states = policy.predict(pairs[p].0, pairs[p].1, n_subgoals, true, derive_seed(seed, &[2, c as u64, k as u64]));
                let costs = segment_costs(env, &states).0;
                (p, states, costs)
            })
            .collect();
        let to_go = |costs: &[f64], t: usize| costs[t - 1..].iter().sum::<f64>();
        let mut base = vec![vec![0.0; n_subgoals]; pairs.len()];
        for (p, _, costs) in &episodes {
            for t in 1..=n_subgoals {
                base[*p][t - 1] += to_go(costs, t) / cfg.repeats as f64;
            }
        }
        let mut decisions: Vec<Decision> = Vec::with_capacity(episodes.len() * n_subgoals);
        for (p, states, costs) in &episodes {
            for t in 1..=n_subgoals {
                decisions.push(Decision { s: states[t - 1], g: *states.last().unwrap(), x: states[t], advantage: to_go(costs, t) - base[*p][t - 1] });
            }
        }
        let old = with_old_log_probs(&policy.net, &decisions);
        let ppo = PpoConfig { grad_clip: Some(10.0), ..cfg.ppo.clone() };
        for _ in 0..ppo.epochs {
            ppo_surrogate_step(&mut policy.net, &old, &ppo, &mut state)?;
        }
        let (mean_cost, success_rate) = monitor(&evaluate_seq(env, &policy, n_subgoals, &watch));
        curve.push(CurveRow { cycle: c, depth_being_trained: 1, mean_cost, success_rate });
        best.offer(mean_cost, &policy.net);
        if stop.update(mean_cost) {
            break;
        }
    }
    policy.net = best.net;
    Ok((policy, curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub pair_id: usize,
    pub cost: f64,
    pub success: bool,
}

/// Held-out start/goal pairs, disjoint in stream from the training pairs.
pub fn held_out_pairs(env: &World2D, count: usize, seed: u64) -> Vec<(State2D, State2D)> {
    (0..count).map(|i| env.sample_start_goal(&mut derive_rng(seed, &[9, i as u64]))).collect()
}

fn eval_rows(env: &World2D, trajs: Vec<Vec<State2D>>) -> Vec<EvalRow> {
    trajs
        .into_iter()
        .enumerate()
        .map(|(pair_id, t)| {
            let (costs, success) = segment_costs(env, &t);
            EvalRow { pair_id, cost: costs.iter().sum(), success }
        })
        .collect()
}

/// Mean-mode trees; success means every segment is collision free.
pub fn evaluate_sgt(env: &World2D, policy: &SgtPolicy, depth: usize, pairs: &[(State2D, State2D)]) -> Result<Vec<EvalRow>, PgError> {
    let trajs = pairs
        .iter()
        .map(|&(s, g)| predict_subgoals(policy, s, g, depth, PredictMode::Mean, 0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(eval_rows(env, trajs))
}

pub fn evaluate_seq(env: &World2D, policy: &SeqPolicy, n_subgoals: usize, pairs: &[(State2D, State2D)]) -> Vec<EvalRow> {
    eval_rows(env, pairs.iter().map(|&(s, g)| policy.predict(s, g, n_subgoals, false, 0)).collect())
}

pub fn success_rate(rows: &[EvalRow]) -> f64 {
    rows.iter().filter(|r| r.success).count() as f64 / rows.len().max(1) as f64
}
