#![allow(dead_code)]

use rand::Rng;
use sgt_core::env2d::State2D;
use sgt_core::graph::{random_graph, EdgeCosts};
use sgt_core::pg::toy::{ToyPolicy, ToyProblem, N_STATES};
use sgt_core::pg::SgtPolicy;
use sgt_core::rng::rng_from_seed;
use sgt_core::{Graph, C_MAX};

/// Shortest path costs by depth-first enumeration of simple paths from every
/// source. A partial path is dropped once it reaches a node no cheaper than a
/// path already found to that node. Unreachable pairs hold `C_MAX`.
pub fn brute_force_apsp(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![C_MAX; n * n];
    for s in 0..n {
        let mut best = vec![f64::INFINITY; n];
        let mut on_path = vec![false; n];
        dfs(g, s, 0.0, &mut best, &mut on_path);
        for t in 0..n {
            if best[t].is_finite() {
                out[s * n + t] = best[t];
            }
        }
    }
    out
}

fn dfs(g: &Graph, v: usize, cost: f64, best: &mut [f64], on_path: &mut [bool]) {
    if cost >= best[v] {
        return;
    }
    best[v] = cost;
    on_path[v] = true;
    for w in 0..g.n() {
        let c = g.cost(v, w);
        if w != v && !on_path[w] && !c.is_max() {
            dfs(g, w, cost + c.value(), best, on_path);
        }
    }
    on_path[v] = false;
}

/// Integer costs 1..=9 at the given edge density.
pub fn integer_graph(n: usize, density: f64, seed: u64) -> Graph {
    random_graph(n, density, EdgeCosts::Integer { lo: 1, hi: 9 }, &mut rng_from_seed(seed))
}

pub fn values(t: &sgt_core::exact::ValueTable) -> Vec<f64> {
    t.values().iter().map(|c| c.value()).collect()
}

/// Least-squares slope of `ln y` against `ln x`, computed here rather than
/// through the library.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// A policy with every parameter jittered so means leave the midpoint.
pub fn jittered_policy(depth: usize, seed: u64) -> SgtPolicy {
    let mut p = SgtPolicy::new(depth, seed);
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    for net in &mut p.depth_params {
        for v in &mut net.params {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    p
}

pub fn random_traj(depth: usize, seed: u64) -> Vec<State2D> {
    let mut rng = rng_from_seed(seed);
    (0..=1usize << depth).map(|_| State2D::new(rng.gen_range(-0.2..1.2), rng.gen_range(-0.2..1.2))).collect()
}

/// Random costs and logits on the enumerable three-state problem.
pub fn toy(depth: usize, seed: u64) -> (ToyProblem, ToyPolicy) {
    let mut rng = rng_from_seed(seed);
    let mut costs = [[0.0; N_STATES]; N_STATES];
    for row in costs.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.gen_range(0.0..5.0);
        }
    }
    let logits = (0..depth).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    (ToyProblem { costs, start: 0, goal: 2, depth }, ToyPolicy { logits })
}

/// Central differences of the exact objective in depth `d`'s logits.
pub fn fd_objective(pb: &ToyProblem, policy: &ToyPolicy, d: usize) -> Vec<f64> {
    let h = 1e-5;
    (0..policy.logits[d - 1].len())
        .map(|k| {
            let mut hi = policy.clone();
            hi.logits[d - 1][k] += h;
            let mut lo = policy.clone();
            lo.logits[d - 1][k] -= h;
            (pb.objective(&hi) - pb.objective(&lo)) / (2.0 * h)
        })
        .collect()
}
