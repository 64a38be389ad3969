//! Executing plans in the world and the batch-RL comparison harness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fitted::{extract_sgt_plan, fitted_sgtdp, FittedConfig, SearchGrid, ValueModelStack};
use super::fqi::{fqi_universal, FqiConfig, UniversalQ};
use super::inverse::{fit_inverse_model, InverseModel};
use super::ApproxError;
use crate::env2d::{State2D, World2D};
use crate::rng::{derive_rng, derive_seed};

#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    InverseModel(&'a InverseModel),
    Fqi(&'a UniversalQ),
}

impl Controller<'_> {
    fn action(&self, s: State2D, target: State2D) -> usize {
        match self {
            Controller::InverseModel(im) => im.action_toward(s, target),
            Controller::Fqi(q) => q.greedy_action(s, target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub final_distance: f64,
    pub collided: bool,
    pub steps: usize,
}

/// Follows `plan` from `start`: the current target is the first sub-goal
/// farther than `threshold`, and the rollout ends once the last one is
/// within `threshold` or after `max_steps` moves.
pub fn track_subgoals(w: &World2D, start: State2D, plan: &[State2D], controller: Controller<'_>, threshold: f64, max_steps: usize) -> RolloutResult {
    assert!(!plan.is_empty(), "plan must contain the goal");
    let goal = *plan.last().unwrap();
    let mut s = start;
    let mut idx = 0;
    let mut collided = false;
    let mut steps = 0;
    loop {
        while idx < plan.len() && s.dist(plan[idx]) <= threshold {
            idx += 1;
        }
        if idx == plan.len() || steps == max_steps {
            break;
        }
        let u = controller.action(s, plan[idx]);
        let (next, c) = w.step(s, u).expect("controllers emit valid actions");
        collided |= c.value() >= w.collision_cost;
        s = next;
        steps += 1;
    }
    RolloutResult { final_distance: s.dist(goal), collided, steps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMethod {
    SgtdpIm,
    SgtdpFqi,
    Fqi,
}

impl BatchMethod {
    pub const ALL: [BatchMethod; 3] = [BatchMethod::SgtdpIm, BatchMethod::SgtdpFqi, BatchMethod::Fqi];

    pub fn name(self) -> &'static str {
        match self {
            BatchMethod::SgtdpIm => "sgtdp_im",
            BatchMethod::SgtdpFqi => "sgtdp_fqi",
            BatchMethod::Fqi => "fqi",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRlConfig {
    pub tuples: usize,
    pub grid_resolution: usize,
    pub eval_pairs: usize,
    pub max_steps: usize,
    pub inverse_k: usize,
    pub fitted: FittedConfig,
    pub fqi: FqiConfig,
}

impl Default for BatchRlConfig {
    fn default() -> Self {
        BatchRlConfig {
            tuples: 20_000,
            grid_resolution: 50,
            eval_pairs: 200,
            max_steps: 400,
            inverse_k: 5,
            fitted: FittedConfig::default(),
            fqi: FqiConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRow {
    pub method: BatchMethod,
    pub pair_id: usize,
    pub final_distance: f64,
    pub collided: bool,
    pub steps: usize,
}

/// Everything trained for one seed of the comparison.
pub struct BatchRlModels {
    pub grid: SearchGrid,
    pub stack: ValueModelStack,
    pub inverse: InverseModel,
    pub q: UniversalQ,
}

pub fn train_batch_rl(w: &World2D, cfg: &BatchRlConfig, seed: u64) -> Result<BatchRlModels, ApproxError> {
    let data = w.sample_dataset(cfg.tuples, derive_seed(seed, &[0])).map_err(|_| ApproxError::EmptyData)?;
    let grid = SearchGrid::new(w, cfg.grid_resolution);
    let stack = fitted_sgtdp(&data, &cfg.fitted, &grid, derive_seed(seed, &[1]))?;
    let inverse = fit_inverse_model(&data, cfg.inverse_k, w.step_size)?;
    let q = fqi_universal(&data, &cfg.fqi, derive_seed(seed, &[2]))?;
    Ok(BatchRlModels { grid, stack, inverse, q })
}

/// Start/goal pairs for evaluation, drawn from free space.
pub fn eval_pairs(w: &World2D, count: usize, seed: u64) -> Vec<(State2D, State2D)> {
    (0..count)
        .map(|i| w.sample_start_goal(&mut derive_rng(seed, &[3, i as u64])))
        .collect()
}

/// Rolls out every method on every pair; rows are ordered by method, then pair.
pub fn evaluate_batch_rl(w: &World2D, cfg: &BatchRlConfig, models: &BatchRlModels, seed: u64) -> Vec<RolloutRow> {
    let pairs = eval_pairs(w, cfg.eval_pairs, seed);
    let per_pair: Vec<Vec<RolloutRow>> = pairs
        .par_iter()
        .enumerate()
        .map(|(pair_id, &(s, g))| {
            let plan = extract_sgt_plan(&models.stack, s, g, &models.grid).flatten().expect("plans are full trees");
            BatchMethod::ALL
                .iter()
                .map(|&method| {
                    let r = match method {
                        BatchMethod::SgtdpIm => track_subgoals(w, s, &plan, Controller::InverseModel(&models.inverse), w.goal_threshold, cfg.max_steps),
                        BatchMethod::SgtdpFqi => track_subgoals(w, s, &plan, Controller::Fqi(&models.q), w.goal_threshold, cfg.max_steps),
                        BatchMethod::Fqi => track_subgoals(w, s, &[g], Controller::Fqi(&models.q), w.goal_threshold, cfg.max_steps),
                    };
                    RolloutRow { method, pair_id, final_distance: r.final_distance, collided: r.collided, steps: r.steps }
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<RolloutRow> = per_pair.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.method, r.pair_id));
    rows
}

/// `(mean final distance, collision rate)` for one method.
pub fn summarize(rows: &[RolloutRow], method: BatchMethod) -> (f64, f64) {
    let mine: Vec<&RolloutRow> = rows.iter().filter(|r| r.method == method).collect();
    let n = mine.len().max(1) as f64;
    let dist = mine.iter().map(|r| r.final_distance).sum::<f64>() / n;
    let coll = mine.iter().filter(|r| r.collided).count() as f64 / n;
    (dist, coll)
}
