//! Bounded value noise, error-propagation checks and adversarial instances.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::exact::{
    bellman_backup, bellman_levels, floyd_warshall, greedy_bellman_trajectory, greedy_sgt_tree, sgt_backup,
    BellmanStack, BellmanTables, ValueStack, ValueTable,
};
use crate::graph::{make_graph, trajectory_cost, Graph};
use crate::rng::{derive_rng, derive_seed};

/// Absolute slack on bound comparisons, covering float summation order.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// i.i.d. uniform on `[-eps, eps]`.
    UniformPmEps,
    /// i.i.d. `+eps` or `-eps` with equal probability: every entry sits on
    /// the edge of the error budget.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub epsilon: f64,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn uniform(epsilon: f64, seed: u64) -> Self {
        NoiseSpec { epsilon, seed, distribution: NoiseDistribution::UniformPmEps }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.epsilon == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::UniformPmEps => rng.gen_range(-self.epsilon..=self.epsilon),
            NoiseDistribution::Adversarial => {
                if rng.gen_bool(0.5) {
                    self.epsilon
                } else {
                    -self.epsilon
                }
            }
        }
    }
}

/// Adds per-entry noise, clamps at zero and restores the diagonal.
///
/// Saturated entries stay saturated: at `C_MAX` the float spacing is far
/// coarser than any useful epsilon, and "unreachable" has no nearby value.
pub fn perturb_table(table: &ValueTable, spec: &NoiseSpec, stream: &[u64]) -> ValueTable {
    let mut rng = derive_rng(spec.seed, stream);
    let n = table.n();
    let values = table
        .values()
        .iter()
        .map(|&c| {
            let noise = spec.sample(&mut rng);
            if c.is_max() {
                c
            } else {
                Cost::clamped(c.value() + noise)
            }
        })
        .collect();
    ValueTable::new(table.k, n, values)
}

/// `V̂_0 = V_0 + noise`, `V̂_k = T V̂_{k-1} + noise`, for `ceil(log2 n)` levels.
pub fn perturbed_sgtdp(g: &Graph, spec: &NoiseSpec) -> ValueStack {
    perturbed_sgtdp_levels(g, spec, g.depth())
}

pub fn perturbed_sgtdp_levels(g: &Graph, spec: &NoiseSpec, levels: usize) -> ValueStack {
    let mut tables = vec![perturb_table(&ValueTable::from_graph(g), spec, &[0, 0])];
    for k in 1..=levels {
        let next = perturb_table(&sgt_backup(&tables[k - 1]), spec, &[0, k as u64]);
        tables.push(next);
    }
    ValueStack { tables }
}

/// Perturbed Bellman tables `V̂_0 .. V̂_{h_max}` with fresh noise per backup.
pub fn perturbed_bellman(g: &Graph, spec: &NoiseSpec, h_max: usize) -> BellmanStack {
    let mut tables = vec![perturb_table(&ValueTable::from_graph(g), spec, &[1, 0])];
    for h in 1..=h_max {
        let next = perturb_table(&bellman_backup(g, &tables[h - 1]), spec, &[1, h as u64]);
        tables.push(next);
    }
    BellmanStack { tables }
}

/// Covered horizon `N = 2^K` of a stack with top level `K`.
fn sgt_horizon(levels: usize) -> f64 {
    (1u64 << levels) as f64
}

/// `eps (2N - 1)` with `N = 2^K`.
pub fn sgt_value_bound(levels: usize, epsilon: f64) -> f64 {
    epsilon * (2.0 * sgt_horizon(levels) - 1.0)
}

/// `4 N log2(N) eps` with `N = 2^K`.
pub fn sgt_trajectory_bound(levels: usize, epsilon: f64) -> f64 {
    4.0 * sgt_horizon(levels) * levels as f64 * epsilon
}

/// `(N^2 - N) eps` for a sequential horizon `N`.
pub fn bellman_trajectory_bound(horizon: usize, epsilon: f64) -> f64 {
    let n = horizon as f64;
    (n * n - n) * epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Sgt,
    Bellman,
}

impl Extractor {
    pub fn name(self) -> &'static str {
        match self {
            Extractor::Sgt => "sgt",
            Extractor::Bellman => "bellman",
        }
    }
}

/// One evaluated `(s, g)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub start: usize,
    pub goal: usize,
    pub true_cost: f64,
    pub optimal_cost: f64,
    pub excess: f64,
    pub bound: f64,
    pub value_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: Extractor,
    pub n: usize,
    pub epsilon: f64,
    pub observed_value_error: f64,
    pub value_bound: f64,
    pub observed_traj_excess: f64,
    pub mean_traj_excess: f64,
    pub traj_bound: f64,
    pub violations: usize,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} bound violated {} time(s): worst excess {} vs bound {}, worst value error {} vs bound {}",
    report.method.name(), report.violations, report.observed_traj_excess, report.traj_bound,
    report.observed_value_error, report.value_bound)]
pub struct BoundViolation {
    pub report: Box<BoundReport>,
}

/// Ordered pairs `(s, g)` with a finite optimal cost.
pub fn reachable_pairs(exact: &ValueTable) -> Vec<(usize, usize)> {
    let n = exact.n();
    (0..n)
        .flat_map(|s| (0..n).map(move |g| (s, g)))
        .filter(|&(s, g)| !exact.get(s, g).is_max())
        .collect()
}

/// True cost of the greedy SGT trajectory extracted from `stack`.
pub fn sgt_true_cost(g: &Graph, stack: &ValueStack, s: usize, goal: usize) -> Cost {
    let states = greedy_sgt_tree(stack, s, goal).flatten().expect("greedy trees are well formed");
    trajectory_cost(g, &states)
}

/// Greedy SGT excess over the optimum for every reachable pair.
pub fn sgt_excesses(g: &Graph, stack: &ValueStack, exact: &ValueTable) -> Vec<(usize, usize, f64, f64)> {
    reachable_pairs(exact)
        .into_iter()
        .map(|(s, goal)| {
            let true_cost = sgt_true_cost(g, stack, s, goal).value();
            let opt = exact.get(s, goal).value();
            (s, goal, true_cost, opt)
        })
        .collect()
}

fn finish(
    method: Extractor,
    n: usize,
    spec: &NoiseSpec,
    value_bound: f64,
    traj_bound: f64,
    mut outcomes: Vec<TrialOutcome>,
) -> Result<BoundReport, BoundViolation> {
    outcomes.sort_by_key(|o| o.trial);
    let violations = outcomes
        .iter()
        .filter(|o| o.excess > traj_bound + BOUND_SLACK || o.value_error > value_bound + BOUND_SLACK)
        .count();
    let observed_traj_excess = outcomes.iter().map(|o| o.excess).fold(0.0, f64::max);
    let observed_value_error = outcomes.iter().map(|o| o.value_error).fold(0.0, f64::max);
    let mean_traj_excess = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().map(|o| o.excess).sum::<f64>() / outcomes.len() as f64
    };
    let report = BoundReport {
        method,
        n,
        epsilon: spec.epsilon,
        observed_value_error,
        value_bound,
        observed_traj_excess,
        mean_traj_excess,
        traj_bound,
        violations,
        outcomes,
    };
    if violations > 0 {
        Err(BoundViolation { report: Box::new(report) })
    } else {
        Ok(report)
    }
}

fn draw_pair(pairs: &[(usize, usize)], seed: u64, trial: usize) -> (usize, usize) {
    let mut rng = derive_rng(seed, &[2, trial as u64]);
    pairs[rng.gen_range(0..pairs.len())]
}

/// Each trial perturbs a fresh SGT stack, draws a reachable pair, and checks
/// both the value bound on the top table and the trajectory bound.
pub fn check_sgt_trajectory_bound(g: &Graph, spec: &NoiseSpec, trials: usize) -> Result<BoundReport, BoundViolation> {
    assert!(trials >= 1, "at least one trial");
    let exact = floyd_warshall(g);
    let pairs = reachable_pairs(&exact);
    let levels = g.depth();
    let value_bound = sgt_value_bound(levels, spec.epsilon);
    let traj_bound = sgt_trajectory_bound(levels, spec.epsilon);
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_spec = NoiseSpec { seed: derive_seed(spec.seed, &[trial as u64]), ..*spec };
            let stack = perturbed_sgtdp(g, &trial_spec);
            let value_error = stack.top().max_abs_diff(&exact);
            let (s, goal) = draw_pair(&pairs, spec.seed, trial);
            let true_cost = sgt_true_cost(g, &stack, s, goal).value();
            let optimal_cost = exact.get(s, goal).value();
            TrialOutcome { trial, start: s, goal, true_cost, optimal_cost, excess: true_cost - optimal_cost, bound: traj_bound, value_error }
        })
        .collect();
    finish(Extractor::Sgt, g.n(), spec, value_bound, traj_bound, outcomes)
}

/// Bellman analogue with horizon `N = n` and per-horizon perturbed tables.
pub fn check_bellman_trajectory_bound(g: &Graph, spec: &NoiseSpec, trials: usize) -> Result<BoundReport, BoundViolation> {
    assert!(trials >= 1, "at least one trial");
    let exact = floyd_warshall(g);
    let pairs = reachable_pairs(&exact);
    let horizon = g.n();
    let traj_bound = bellman_trajectory_bound(horizon, spec.epsilon);
    // V̂_h collects h + 1 noisy backups.
    let value_bound = spec.epsilon * horizon as f64;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let trial_spec = NoiseSpec { seed: derive_seed(spec.seed, &[trial as u64]), ..*spec };
            let stack = perturbed_bellman(g, &trial_spec, horizon.saturating_sub(1));
            let value_error = stack.top().max_abs_diff(&exact);
            let (s, goal) = draw_pair(&pairs, spec.seed, trial);
            let traj = greedy_bellman_trajectory(g, BellmanTables::PerHorizon(&stack.tables), s, goal, horizon);
            let true_cost = traj.total_cost().value();
            let optimal_cost = exact.get(s, goal).value();
            TrialOutcome { trial, start: s, goal, true_cost, optimal_cost, excess: true_cost - optimal_cost, bound: traj_bound, value_error }
        })
        .collect();
    finish(Extractor::Bellman, g.n(), spec, value_bound, traj_bound, outcomes)
}

/// Chain `s_0 -> ... -> s_{N-1} -> g` (ids `0..N`, goal id `N`), edge cost
/// `eps`, together with a single value table that equals the optimum except
/// `V̂(s_0, g) = 0`.
///
/// Greedy extraction with that table prefers staying at `s_0` over every
/// move, so the forced final hop `s_0 -> g` is unreachable.
#[derive(Debug, Clone)]
pub struct AdversarialSingle {
    pub graph: Graph,
    pub table: ValueTable,
    pub start: usize,
    pub goal: usize,
    pub horizon: usize,
}

pub fn adversarial_single_v(n: usize, epsilon: f64) -> AdversarialSingle {
    assert!(n >= 3, "chain needs at least 3 nodes");
    assert!(epsilon > 0.0, "epsilon must be positive");
    let goal = n;
    let edges: Vec<_> = (0..n).map(|i| (i, i + 1, epsilon)).collect();
    let graph = make_graph(n + 1, &edges).expect("chain edges are valid");
    let exact = floyd_warshall(&graph);
    let mut table = exact.clone();
    table.set(0, goal, Cost::ZERO);
    let budget = epsilon * n as f64;
    let err = table.max_abs_diff(&exact);
    assert!(err <= budget + BOUND_SLACK, "adversarial table error {err} exceeds {budget}");
    AdversarialSingle { graph, table, start: 0, goal, horizon: n }
}

/// Graph where every `s_k` reaches both `s_{k+1}` and `s_{N-1}` for
/// `(N - k - 1) eps`, `s_{N-1} -> g` is free, and the optimum from `s_0` is
/// `(N - 1) eps`. The per-horizon tables lure greedy extraction one chain
/// link at a time, for a total of `(N^2 - N) eps / 2`.
#[derive(Debug, Clone)]
pub struct AdversarialMulti {
    pub graph: Graph,
    pub tables: BellmanStack,
    pub exact_tables: BellmanStack,
    pub start: usize,
    pub goal: usize,
    pub horizon: usize,
}

pub fn adversarial_multi_v(n: usize, epsilon: f64, delta: f64) -> AdversarialMulti {
    assert!(n >= 3, "construction needs at least 3 chain nodes");
    assert!(delta > 0.0 && delta <= epsilon, "need 0 < delta <= epsilon");
    let goal = n;
    let last = n - 1;
    let mut edges = Vec::new();
    for k in 0..last {
        let c = (n - k - 1) as f64 * epsilon;
        edges.push((k, k + 1, c));
        edges.push((k, last, c));
    }
    edges.push((last, goal, 0.0));
    let graph = make_graph(n + 1, &edges).expect("construction edges are valid");

    let h_max = n - 2;
    let exact_tables = bellman_levels(&graph, h_max);
    let mut tables = Vec::with_capacity(h_max + 1);
    for (h, exact) in exact_tables.tables.iter().enumerate() {
        let mut t = exact.clone();
        for j in 0..last {
            let v = exact.get(j, goal);
            if !v.is_max() {
                // Breaks the tie between staying put and the true optimum.
                t.set(j, goal, v + Cost::new(delta / 2.0).unwrap());
            }
        }
        let lure = n - h - 1;
        if (1..last).contains(&lure) {
            t.set(lure, goal, Cost::ZERO);
        }
        t.set(last, goal, Cost::new(delta).unwrap());
        // Table h accumulates h + 1 backups, each off by at most eps.
        let budget = (h + 1) as f64 * epsilon;
        let err = t.max_abs_diff(exact);
        assert!(err <= budget + BOUND_SLACK, "table {h} error {err} exceeds {budget}");
        tables.push(t);
    }
    AdversarialMulti { graph, tables: BellmanStack { tables }, exact_tables, start: 0, goal, horizon: n }
}

/// Closed-form greedy cost of the multi-table construction.
pub fn adversarial_multi_cost(n: usize, epsilon: f64) -> f64 {
    let n = n as f64;
    (n * n - n) * epsilon / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::sgtdp;
    use crate::graph::g4;

    #[test]
    fn zero_noise_is_exact() {
        let g = g4();
        let spec = NoiseSpec::uniform(0.0, 3);
        assert_eq!(perturbed_sgtdp(&g, &spec), sgtdp(&g));
    }

    #[test]
    fn every_entry_within_epsilon() {
        let g = g4();
        for dist in [NoiseDistribution::UniformPmEps, NoiseDistribution::Adversarial] {
            let spec = NoiseSpec { epsilon: 0.1, seed: 9, distribution: dist };
            let base = ValueTable::from_graph(&g);
            let noisy = perturb_table(&base, &spec, &[0]);
            assert!(noisy.max_abs_diff(&base) <= 0.1 + 1e-15);
            for i in 0..4 {
                assert_eq!(noisy.get(i, i), Cost::ZERO);
            }
        }
    }

    #[test]
    fn g4_bounds() {
        let g = g4();
        assert!((sgt_value_bound(2, 0.1) - 0.7).abs() < 1e-12);
        assert!((sgt_trajectory_bound(2, 0.1) - 3.2).abs() < 1e-12);
        let report = check_sgt_trajectory_bound(&g, &NoiseSpec::uniform(0.1, 1), 50).unwrap();
        assert!(report.observed_value_error <= 0.7 + BOUND_SLACK);
        assert!(report.observed_traj_excess <= 3.2 + BOUND_SLACK);
    }

    #[test]
    fn zero_noise_has_zero_excess() {
        let g = g4();
        let spec = NoiseSpec::uniform(0.0, 5);
        let sgt = check_sgt_trajectory_bound(&g, &spec, 20).unwrap();
        let bell = check_bellman_trajectory_bound(&g, &spec, 20).unwrap();
        assert!(sgt.outcomes.iter().chain(&bell.outcomes).all(|o| o.excess == 0.0));
    }

    #[test]
    fn bellman_bound_formula() {
        assert!((bellman_trajectory_bound(8, 0.05) - 2.8).abs() < 1e-12);
    }

    #[test]
    fn single_table_adversary_stalls() {
        let adv = adversarial_single_v(4, 0.1);
        let traj = greedy_bellman_trajectory(&adv.graph, BellmanTables::Single(&adv.table), 0, adv.goal, adv.horizon);
        assert_eq!(traj.states, vec![0, 0, 0, 0, 4]);
        assert!(traj.total_cost().is_max());
        let opt = floyd_warshall(&adv.graph).get(0, adv.goal).value();
        assert!((opt - 0.4).abs() < 1e-12);
        let exact = sgt_true_cost(&adv.graph, &sgtdp(&adv.graph), 0, adv.goal).value();
        assert!((exact - 0.4).abs() < 1e-12);
    }

    #[test]
    fn multi_table_adversary_walks_the_chain() {
        let adv = adversarial_multi_v(6, 0.1, 0.05);
        let traj = greedy_bellman_trajectory(&adv.graph, BellmanTables::PerHorizon(&adv.tables.tables), 0, adv.goal, adv.horizon);
        assert_eq!(traj.states, vec![0, 1, 2, 3, 4, 5, 6]);
        assert!((traj.total_cost().value() - 1.5).abs() < 1e-12);
        let exact = greedy_bellman_trajectory(&adv.graph, BellmanTables::PerHorizon(&adv.exact_tables.tables), 0, adv.goal, adv.horizon);
        assert!((exact.total_cost().value() - 0.5).abs() < 1e-12);
    }
}
