//! Goal-conditioned fitted Q iteration with one regressor per action.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::{knn_fit, KnnRegressor};
use super::{pair_features, ApproxError};
use crate::env2d::{State2D, TransitionTuple, N_ACTIONS};
use crate::rng::derive_rng;

/// Where the regression goals of each iteration come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GoalSampler {
    /// Uniformly drawn dataset states.
    Data,
    /// A single goal shared by every tuple.
    Fixed(State2D),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FqiConfig {
    pub iterations: usize,
    pub goal_threshold: f64,
    pub k_neighbors: usize,
    pub goals: GoalSampler,
    /// Regression goals drawn per tuple and iteration.
    pub goals_per_tuple: usize,
}

impl Default for FqiConfig {
    fn default() -> Self {
        FqiConfig { iterations: 60, goal_threshold: 0.15, k_neighbors: 5, goals: GoalSampler::Data, goals_per_tuple: 1 }
    }
}

/// `Q̂(s, u, g)`; actions absent from the data are never chosen.
#[derive(Debug, Clone)]
pub struct UniversalQ {
    pub models: Vec<Option<KnnRegressor<4>>>,
}

impl UniversalQ {
    pub fn q(&self, s: State2D, u: usize, g: State2D) -> f64 {
        match &self.models[u] {
            Some(m) => m.predict(&pair_features(s, g)),
            None => f64::INFINITY,
        }
    }

    /// Smallest-id action minimising `Q̂(s, ., g)` and its value.
    pub fn best(&self, s: State2D, g: State2D) -> (usize, f64) {
        let mut arg = 0;
        let mut best = f64::INFINITY;
        for u in 0..N_ACTIONS {
            let v = self.q(s, u, g);
            if v < best {
                best = v;
                arg = u;
            }
        }
        (arg, best)
    }

    pub fn greedy_action(&self, s: State2D, g: State2D) -> usize {
        self.best(s, g).0
    }
}

fn fit_per_action(actions: impl Iterator<Item = usize>, rows: Vec<[f64; 4]>, targets: Vec<f64>, k: usize) -> Result<UniversalQ, ApproxError> {
    let mut buckets: Vec<Vec<([f64; 4], f64)>> = vec![Vec::new(); N_ACTIONS];
    for ((u, x), y) in actions.zip(rows).zip(targets) {
        buckets[u].push((x, y));
    }
    let models = buckets
        .into_iter()
        .map(|b| if b.is_empty() { Ok(None) } else { knn_fit(b, k).map(Some) })
        .collect::<Result<_, _>>()?;
    Ok(UniversalQ { models })
}

/// Iterates `Q̂(s, u, g) <- c + min_u' Q̂(s', u', g)`, dropping the bootstrap
/// term once `|s' - g| <= goal_threshold`. The first fit uses each
/// transition's own successor as its goal.
pub fn fqi_universal(data: &[TransitionTuple], cfg: &FqiConfig, seed: u64) -> Result<UniversalQ, ApproxError> {
    if data.is_empty() {
        return Err(ApproxError::EmptyData);
    }
    let rows = data.iter().map(|t| pair_features(t.s, t.s_next)).collect();
    let mut q = fit_per_action(data.iter().map(|t| t.u), rows, data.iter().map(|t| t.c).collect(), cfg.k_neighbors)?;
    let reps = match cfg.goals {
        GoalSampler::Data => cfg.goals_per_tuple.max(1),
        GoalSampler::Fixed(_) => 1,
    };
    let tuples: Vec<&TransitionTuple> = (0..reps).flat_map(|_| data.iter()).collect();
    for it in 1..=cfg.iterations {
        let mut rng = derive_rng(seed, &[it as u64]);
        let goals: Vec<State2D> = match cfg.goals {
            GoalSampler::Data => (0..tuples.len()).map(|_| data[rng.gen_range(0..data.len())].s).collect(),
            GoalSampler::Fixed(g) => vec![g; tuples.len()],
        };
        let targets: Vec<f64> = tuples
            .par_iter()
            .zip(&goals)
            .map(|(t, &g)| {
                if t.s_next.dist(g) <= cfg.goal_threshold {
                    t.c
                } else {
                    t.c + q.best(t.s_next, g).1
                }
            })
            .collect();
        let rows = tuples.iter().zip(&goals).map(|(t, &g)| pair_features(t.s, g)).collect();
        q = fit_per_action(tuples.iter().map(|t| t.u), rows, targets, cfg.k_neighbors)?;
    }
    Ok(q)
}
