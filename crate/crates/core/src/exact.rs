//! Exact all-pairs solvers and greedy trajectory extraction.

use rayon::prelude::*;

use crate::cost::Cost;
use crate::graph::Graph;
use crate::trajectory::{SubGoalTree, Trajectory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExactError {
    #[error("goal {goal} is unreachable from {start}")]
    Unreachable { start: usize, goal: usize },
    #[error("node {node} is out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
}

/// One level of a value recursion: a dense `n x n` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub k: usize,
    n: usize,
    values: Vec<Cost>,
}

impl ValueTable {
    pub fn new(k: usize, n: usize, mut values: Vec<Cost>) -> Self {
        assert_eq!(values.len(), n * n, "table must be n*n");
        for i in 0..n {
            values[i * n + i] = Cost::ZERO;
        }
        ValueTable { k, n, values }
    }

    pub fn from_graph(g: &Graph) -> Self {
        ValueTable::new(0, g.n(), g.costs().to_vec())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Cost {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, c: Cost) {
        self.values[i * self.n + j] = c;
    }

    pub fn values(&self) -> &[Cost] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[Cost] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Largest absolute entry difference, `||a - b||_inf`.
    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a.value() - b.value()).abs())
            .fold(0.0, f64::max)
    }
}

/// `(a ⊗ b)[i][j] = min_m a[i][m] + b[m][j]`, diagonal re-zeroed.
pub fn min_plus(a: &ValueTable, b: &ValueTable, k: usize) -> ValueTable {
    let n = a.n;
    assert_eq!(n, b.n);
    let mut out = vec![Cost::MAX; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let arow = a.row(i);
        for (m, &aim) in arow.iter().enumerate() {
            if aim.is_max() {
                continue;
            }
            for (slot, &bmj) in row.iter_mut().zip(b.row(m)) {
                let c = aim + bmj;
                if c < *slot {
                    *slot = c;
                }
            }
        }
    });
    ValueTable::new(k, n, out)
}

/// One exact SGT backup: `V_k = V_{k-1} ⊗ V_{k-1}`.
pub fn sgt_backup(prev: &ValueTable) -> ValueTable {
    min_plus(prev, prev, prev.k + 1)
}

/// One exact Bellman backup: `V_{h+1}(s, g) = min_m c(s, m) + V_h(m, g)`.
pub fn bellman_backup(g: &Graph, prev: &ValueTable) -> ValueTable {
    min_plus(&ValueTable::from_graph(g), prev, prev.k + 1)
}

/// Value tables `[V_0, ..., V_K]` where `V_k` allows `2^k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueStack {
    pub tables: Vec<ValueTable>,
}

impl ValueStack {
    pub fn top(&self) -> &ValueTable {
        self.tables.last().expect("stack has level 0")
    }

    /// Index of the top level.
    pub fn depth(&self) -> usize {
        self.tables.len() - 1
    }
}

/// Tables `[V^B_0, ..., V^B_H]` where `V^B_h` allows `h + 1` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanStack {
    pub tables: Vec<ValueTable>,
}

impl BellmanStack {
    pub fn top(&self) -> &ValueTable {
        self.tables.last().expect("stack has level 0")
    }
}

/// Runs the doubling recursion for `ceil(log2 n)` levels.
pub fn sgtdp(g: &Graph) -> ValueStack {
    sgtdp_levels(g, g.depth())
}

/// Runs the doubling recursion for an explicit number of levels.
pub fn sgtdp_levels(g: &Graph, levels: usize) -> ValueStack {
    let mut tables = Vec::with_capacity(levels + 1);
    tables.push(ValueTable::from_graph(g));
    for _ in 0..levels {
        let next = sgt_backup(tables.last().unwrap());
        tables.push(next);
    }
    ValueStack { tables }
}

pub fn floyd_warshall(g: &Graph) -> ValueTable {
    floyd_warshall_next(g).0
}

/// Floyd-Warshall table plus, for each `(s, t)`, the first hop of a
/// shortest path (`usize::MAX` when unreachable).
fn floyd_warshall_next(g: &Graph) -> (ValueTable, Vec<usize>) {
    let n = g.n();
    let mut v = ValueTable::from_graph(g);
    let mut next: Vec<usize> = (0..n * n).map(|k| if v.values()[k].is_max() { usize::MAX } else { k % n }).collect();
    for m in 0..n {
        for s in 0..n {
            let vsm = v.get(s, m);
            if vsm.is_max() {
                continue;
            }
            for t in 0..n {
                let c = vsm + v.get(m, t);
                if c < v.get(s, t) {
                    v.set(s, t, c);
                    next[s * n + t] = next[s * n + m];
                }
            }
        }
    }
    (v, next)
}

/// Shortest path `s .. g` recovered from Floyd-Warshall first hops.
pub fn floyd_warshall_path(graph: &Graph, s: usize, g: usize) -> Result<Vec<usize>, ExactError> {
    let n = graph.n();
    for node in [s, g] {
        if node >= n {
            return Err(ExactError::NodeOutOfRange { node, n });
        }
    }
    let (v, next) = floyd_warshall_next(graph);
    if v.get(s, g).is_max() {
        return Err(ExactError::Unreachable { start: s, goal: g });
    }
    let mut path = vec![s];
    let mut cur = s;
    while cur != g {
        cur = next[cur * n + g];
        path.push(cur);
    }
    Ok(path)
}

/// Finite-horizon Bellman tables `V^B_0 .. V^B_{n-1}`.
pub fn bellman_finite_horizon(g: &Graph) -> BellmanStack {
    bellman_levels(g, g.n().saturating_sub(1))
}

/// Bellman tables `V^B_0 .. V^B_h_max`.
pub fn bellman_levels(g: &Graph, h_max: usize) -> BellmanStack {
    let mut tables = Vec::with_capacity(h_max + 1);
    tables.push(ValueTable::from_graph(g));
    for _ in 0..h_max {
        let next = bellman_backup(g, tables.last().unwrap());
        tables.push(next);
    }
    BellmanStack { tables }
}

/// Smallest-id argmin of `left(a, m) + right(m, b)` over all `m`.
fn best_midpoint(left: &ValueTable, right: &ValueTable, a: usize, b: usize) -> usize {
    let mut best = 0;
    let mut best_cost = Cost::MAX;
    let mut found = false;
    for m in 0..left.n() {
        let c = left.get(a, m) + right.get(m, b);
        if !found || c < best_cost {
            best = m;
            best_cost = c;
            found = true;
        }
    }
    best
}

/// Greedy midpoint tree from any stack, without a reachability check.
///
/// The split at level `k` uses table `k - 1`, so the tree has the depth of
/// the stack's top level.
pub fn greedy_sgt_tree(stack: &ValueStack, s: usize, g: usize) -> SubGoalTree<usize> {
    build_tree(stack, stack.depth(), s, g)
}

fn build_tree(stack: &ValueStack, k: usize, a: usize, b: usize) -> SubGoalTree<usize> {
    if k == 0 {
        return SubGoalTree::leaf(a, b);
    }
    let below = &stack.tables[k - 1];
    let m = best_midpoint(below, below, a, b);
    let (left, right) = if k >= 6 {
        rayon::join(|| build_tree(stack, k - 1, a, m), || build_tree(stack, k - 1, m, b))
    } else {
        (build_tree(stack, k - 1, a, m), build_tree(stack, k - 1, m, b))
    };
    SubGoalTree::node(a, b, m, left, right)
}

/// Greedy midpoint tree; fails when the top table says `g` is unreachable.
pub fn greedy_sgt_trajectory(stack: &ValueStack, s: usize, g: usize) -> Result<SubGoalTree<usize>, ExactError> {
    let n = stack.top().n();
    for node in [s, g] {
        if node >= n {
            return Err(ExactError::NodeOutOfRange { node, n });
        }
    }
    if stack.top().get(s, g).is_max() {
        return Err(ExactError::Unreachable { start: s, goal: g });
    }
    Ok(greedy_sgt_tree(stack, s, g))
}

/// Which Bellman tables drive greedy extraction.
#[derive(Debug, Clone, Copy)]
pub enum BellmanTables<'a> {
    /// One table at every step.
    Single(&'a ValueTable),
    /// Table `N - k - 2` at step `k`.
    PerHorizon(&'a [ValueTable]),
}

/// Greedy sequential trajectory `s_0 .. s_N` with `s_N` forced to `g`.
///
/// Step `k` picks the smallest-id argmin of `c(s_k, m) + V(m, g)`. In
/// per-horizon mode the tables must cover indices `0 ..= N - 2`.
pub fn greedy_bellman_trajectory(graph: &Graph, tables: BellmanTables<'_>, s: usize, g: usize, horizon: usize) -> Trajectory {
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(s);
    if horizon == 0 {
        return Trajectory::new(graph, states);
    }
    let mut cur = s;
    for k in 0..horizon - 1 {
        let v = match tables {
            BellmanTables::Single(t) => t,
            BellmanTables::PerHorizon(ts) => &ts[horizon - k - 2],
        };
        let mut best = 0;
        let mut best_cost = Cost::MAX;
        for m in 0..graph.n() {
            let c = graph.cost(cur, m) + v.get(m, g);
            if m == 0 || c < best_cost {
                best = m;
                best_cost = c;
            }
        }
        cur = best;
        states.push(cur);
    }
    states.push(g);
    Trajectory::new(graph, states)
}

/// Sequential horizon used for a graph when none is given: its node count.
pub fn default_horizon(g: &Graph) -> usize {
    g.n()
}
