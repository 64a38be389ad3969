//! Batch value fitting with the doubling recursion over a 2D world.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::{knn_fit, KnnRegressor};
use super::{pair_features, ApproxError};
use crate::env2d::{lattice, State2D, TransitionTuple, World2D};
use crate::rng::derive_rng;
use crate::trajectory::SubGoalTree;

/// Free points of a regular lattice, in lexicographic `(x, y)` order.
#[derive(Debug, Clone)]
pub struct SearchGrid {
    pub resolution: usize,
    pub points: Vec<State2D>,
}

impl SearchGrid {
    pub fn new(world: &World2D, resolution: usize) -> Self {
        SearchGrid { resolution, points: world.free_lattice(resolution) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedConfig {
    pub depth: usize,
    pub c_max: f64,
    pub k_neighbors: usize,
    /// Regression pairs per level; `None` uses the dataset size.
    pub pairs_per_level: Option<usize>,
    /// Data states from which level `k >= 1` regression pairs are drawn.
    pub anchor_pool: usize,
}

impl Default for FittedConfig {
    fn default() -> Self {
        FittedConfig { depth: 6, c_max: 10.0, k_neighbors: 5, pairs_per_level: None, anchor_pool: 500 }
    }
}

/// `[V̂_0, ..., V̂_K]`, each a regressor over `(s, s')`.
#[derive(Debug, Clone)]
pub struct ValueModelStack {
    pub models: Vec<KnnRegressor<4>>,
    pub c_max: f64,
}

impl ValueModelStack {
    pub fn depth(&self) -> usize {
        self.models.len() - 1
    }

    pub fn value(&self, k: usize, s: State2D, g: State2D) -> f64 {
        self.models[k].predict(&pair_features(s, g))
    }
}

/// Level 0 regression data: observed transitions, random pairs at `c_max`,
/// and self pairs at zero, one of each per tuple.
///
/// Random pairs use two different tuples; a pair drawn twice from the same
/// tuple would be a self pair with the wrong target. A single-tuple dataset
/// therefore gets no random pairs.
pub fn level0_data<R: Rng + ?Sized>(data: &[TransitionTuple], c_max: f64, rng: &mut R) -> Vec<([f64; 4], f64)> {
    let n = data.len();
    let mut out = Vec::with_capacity(3 * n);
    out.extend(data.iter().map(|t| (pair_features(t.s, t.s_next), t.c)));
    if n >= 2 {
        for _ in 0..n {
            let a = rng.gen_range(0..n);
            let b = (a + rng.gen_range(1..n)) % n;
            out.push((pair_features(data[a].s, data[b].s), c_max));
        }
    }
    out.extend(data.iter().map(|t| (pair_features(t.s, t.s), 0.0)));
    out
}

/// Fits the stack level by level.
///
/// Level `k` regresses `min_m V̂_{k-1}(s, m) + V̂_{k-1}(m, g)` over grid
/// points `m`, capped at `c_max`, on random pairs of anchor states drawn
/// from the data. Restricting pairs to an anchor pool lets every
/// `V̂_{k-1}(anchor, m)` be evaluated once per level instead of once per pair.
pub fn fitted_sgtdp(data: &[TransitionTuple], cfg: &FittedConfig, grid: &SearchGrid, seed: u64) -> Result<ValueModelStack, ApproxError> {
    if data.is_empty() {
        return Err(ApproxError::EmptyData);
    }
    let mut rng = derive_rng(seed, &[0]);
    let mut models = vec![knn_fit(level0_data(data, cfg.c_max, &mut rng), cfg.k_neighbors)?];
    if cfg.depth == 0 {
        return Ok(ValueModelStack { models, c_max: cfg.c_max });
    }
    let n = data.len();
    let pool: Vec<State2D> = (0..cfg.anchor_pool.max(1)).map(|_| data[rng.gen_range(0..n)].s).collect();
    let n_pairs = cfg.pairs_per_level.unwrap_or(n);
    for k in 1..=cfg.depth {
        let prev = models.last().unwrap();
        let (to_grid, from_grid) = anchor_grid_values(prev, &pool, &grid.points);
        let mut level_rng = derive_rng(seed, &[1, k as u64]);
        let pairs: Vec<(usize, usize)> = (0..n_pairs)
            .map(|_| (level_rng.gen_range(0..pool.len()), level_rng.gen_range(0..pool.len())))
            .collect();
        let reg: Vec<([f64; 4], f64)> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let best = to_grid[a]
                    .iter()
                    .zip(&from_grid[b])
                    .map(|(x, y)| x + y)
                    .fold(f64::INFINITY, f64::min);
                (pair_features(pool[a], pool[b]), best.min(cfg.c_max))
            })
            .collect();
        models.push(knn_fit(reg, cfg.k_neighbors)?);
    }
    Ok(ValueModelStack { models, c_max: cfg.c_max })
}

/// `(V(a, m) for m, V(m, a) for m)` for every anchor `a`.
fn anchor_grid_values(model: &KnnRegressor<4>, anchors: &[State2D], grid: &[State2D]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    anchors
        .par_iter()
        .map(|&a| {
            let to: Vec<f64> = grid.iter().map(|&m| model.predict(&pair_features(a, m))).collect();
            let from: Vec<f64> = grid.iter().map(|&m| model.predict(&pair_features(m, a))).collect();
            (to, from)
        })
        .unzip()
}

/// Greedy midpoint tree: the split at level `k` minimises
/// `V̂_{k-1}(a, m) + V̂_{k-1}(m, b)` over the grid, first grid point on ties.
pub fn extract_sgt_plan(stack: &ValueModelStack, s: State2D, g: State2D, grid: &SearchGrid) -> SubGoalTree<State2D> {
    plan_rec(stack, stack.depth(), s, g, grid)
}

fn plan_rec(stack: &ValueModelStack, k: usize, a: State2D, b: State2D, grid: &SearchGrid) -> SubGoalTree<State2D> {
    if k == 0 {
        return SubGoalTree::leaf(a, b);
    }
    let m = if a == b {
        a
    } else {
        let model = &stack.models[k - 1];
        let mut best = f64::INFINITY;
        let mut arg = a;
        for &m in &grid.points {
            let v = model.predict(&pair_features(a, m)) + model.predict(&pair_features(m, b));
            if v < best {
                best = v;
                arg = m;
            }
        }
        arg
    };
    let (left, right) = rayon::join(|| plan_rec(stack, k - 1, a, m, grid), || plan_rec(stack, k - 1, m, b, grid));
    SubGoalTree::node(a, b, m, left, right)
}

/// `V̂_k(p, g)` for every point `p` of the full `res x res` lattice, per
/// level. Row `j` of a level holds the points with `y = j / (res - 1)`.
pub fn heatmap(stack: &ValueModelStack, g: State2D, res: usize) -> Vec<Vec<Vec<f64>>> {
    let pts = lattice(res);
    stack
        .models
        .iter()
        .map(|model| {
            (0..res)
                .map(|j| (0..res).map(|i| model.predict(&pair_features(pts[i * res + j], g))).collect())
                .collect()
        })
        .collect()
}

/// Fraction of grid points whose level-`k` value to `g` is below `c_max / 2`.
pub fn reachable_fraction(stack: &ValueModelStack, k: usize, g: State2D, grid: &SearchGrid) -> f64 {
    let hits = grid
        .points
        .iter()
        .filter(|&&p| stack.value(k, p, g) < stack.c_max / 2.0)
        .count();
    hits as f64 / grid.points.len() as f64
}
