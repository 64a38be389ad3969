//! Floyd-Warshall style relaxation with a fitted value function.
//!
//! Each iteration refits `V̂(s, g)` to `min(V̂(s, g), V̂(s, m) + V̂(m, g))` for
//! random triples. Under-estimates feed back into later targets with nothing
//! to pull them up again, so the fitted values drift toward a constant.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use super::fitted::level0_data;
use super::knn::{knn_fit, KnnRegressor};
use super::{pair_features, ApproxError};
use crate::cost::Cost;
use crate::env2d::{State2D, TransitionTuple};
use crate::exact::ValueTable;
use crate::graph::Graph;
use crate::rng::derive_rng;

/// Models after each iteration; `models[0]` is the initial fit.
#[derive(Debug, Clone)]
pub struct ApproxFwRun {
    pub models: Vec<KnnRegressor<4>>,
}

impl ApproxFwRun {
    pub fn last(&self) -> &KnnRegressor<4> {
        self.models.last().unwrap()
    }
}

pub fn approx_fw(data: &[TransitionTuple], c_max: f64, iterations: usize, k: usize, seed: u64) -> Result<ApproxFwRun, ApproxError> {
    if data.is_empty() {
        return Err(ApproxError::EmptyData);
    }
    let n = data.len();
    let mut rng = derive_rng(seed, &[0]);
    let mut models = vec![knn_fit(level0_data(data, c_max, &mut rng), k)?];
    for it in 1..=iterations {
        let mut rng = derive_rng(seed, &[1, it as u64]);
        let triples: Vec<(State2D, State2D, State2D)> = (0..n)
            .map(|_| {
                let mut pick = || data[rng.gen_range(0..n)].s;
                (pick(), pick(), pick())
            })
            .collect();
        let mut reg = relaxation_targets(models.last().unwrap(), &triples);
        reg.extend(data.iter().map(|t| (pair_features(t.s, t.s), 0.0)));
        models.push(knn_fit(reg, k)?);
    }
    Ok(ApproxFwRun { models })
}

/// `((s, g), min(V(s, g), V(s, m) + V(m, g)))` for each triple `(s, m, g)`.
pub fn relaxation_targets(v: &KnnRegressor<4>, triples: &[(State2D, State2D, State2D)]) -> Vec<([f64; 4], f64)> {
    triples
        .par_iter()
        .map(|&(s, m, g)| {
            let direct = v.predict(&pair_features(s, g));
            let split = v.predict(&pair_features(s, m)) + v.predict(&pair_features(m, g));
            (pair_features(s, g), direct.min(split))
        })
        .collect()
}

/// Table-lookup version on a graph: values start at the edge costs and
/// random triples are relaxed in place. Without approximation error this
/// converges to the exact shortest paths.
pub fn approx_fw_table(g: &Graph, relaxations: usize, seed: u64) -> ValueTable {
    let n = g.n();
    let mut v: HashMap<(usize, usize), Cost> = HashMap::new();
    for i in 0..n {
        for j in 0..n {
            v.insert((i, j), g.cost(i, j));
        }
    }
    let mut rng = derive_rng(seed, &[2]);
    for _ in 0..relaxations {
        let (s, m, t) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let via = v[&(s, m)] + v[&(m, t)];
        let slot = v.get_mut(&(s, t)).unwrap();
        if via < *slot {
            *slot = via;
        }
    }
    let values = (0..n * n).map(|idx| v[&(idx / n, idx % n)]).collect();
    ValueTable::new(0, n, values)
}

/// `max - min` of predictions on a probe set.
pub fn prediction_spread(model: &KnnRegressor<4>, probes: &[(State2D, State2D)]) -> f64 {
    let preds: Vec<f64> = probes.iter().map(|&(s, g)| model.predict(&pair_features(s, g))).collect();
    let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}
