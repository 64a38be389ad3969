//! Dense directed graphs with nonnegative costs.
//!
//! Every ordered pair has an entry: missing edges carry [`Cost::MAX`] and the
//! diagonal is zero, so a graph is really a complete cost matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{Cost, CostError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("edge ({from}, {to}) has negative cost {cost}")]
    NegativeCost { from: usize, to: usize, cost: f64 },
    #[error("self edge ({node}, {node}) must have zero cost, got {cost}")]
    SelfEdgeNonzero { node: usize, cost: f64 },
    #[error("edge ({from}, {to}) is out of range for {n} nodes")]
    NodeOutOfRange { from: usize, to: usize, n: usize },
    #[error("edge ({from}, {to}) has a NaN cost")]
    NotANumber { from: usize, to: usize },
    #[error("graph must have at least one node")]
    Empty,
}

/// Row-major `n x n` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    costs: Vec<Cost>,
}

/// Builds a graph from an explicit edge list.
///
/// Unlisted off-diagonal pairs become unreachable. A pair listed more than
/// once keeps its cheapest cost. Zero-cost self edges are accepted and ignored.
pub fn make_graph(n: usize, edges: &[(usize, usize, f64)]) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut costs = vec![Cost::MAX; n * n];
    for i in 0..n {
        costs[i * n + i] = Cost::ZERO;
    }
    for &(from, to, cost) in edges {
        if from >= n || to >= n {
            return Err(GraphError::NodeOutOfRange { from, to, n });
        }
        let c = Cost::new(cost).map_err(|e| match e {
            CostError::Negative(cost) => GraphError::NegativeCost { from, to, cost },
            CostError::NotANumber => GraphError::NotANumber { from, to },
        })?;
        if from == to {
            if c != Cost::ZERO {
                return Err(GraphError::SelfEdgeNonzero { node: from, cost });
            }
            continue;
        }
        let slot = &mut costs[from * n + to];
        *slot = (*slot).min(c);
    }
    Ok(Graph { n, costs })
}

impl Graph {
    /// Wraps a full row-major matrix. The diagonal is forced to zero.
    pub fn from_matrix(n: usize, mut costs: Vec<Cost>) -> Result<Graph, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        assert_eq!(costs.len(), n * n, "matrix must be n*n");
        for i in 0..n {
            costs[i * n + i] = Cost::ZERO;
        }
        Ok(Graph { n, costs })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cost(&self, from: usize, to: usize) -> Cost {
        self.costs[from * self.n + to]
    }

    pub fn costs(&self) -> &[Cost] {
        &self.costs
    }

    /// Finite off-diagonal entries as an edge list, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let c = self.cost(i, j);
                if i != j && !c.is_max() {
                    out.push((i, j, c.value()));
                }
            }
        }
        out
    }

    /// Number of SGT levels needed to cover every shortest path: `ceil(log2 n)`.
    pub fn depth(&self) -> usize {
        ceil_log2(self.n)
    }
}

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Total cost of visiting `states` in order; a single state costs nothing.
pub fn trajectory_cost(g: &Graph, states: &[usize]) -> Cost {
    states.windows(2).map(|w| g.cost(w[0], w[1])).sum()
}

/// On-disk graph format: `{"n": 4, "edges": [[0, 1, 1.0], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<Graph, GraphError> {
        make_graph(self.n, &self.edges)
    }
}

impl From<&Graph> for GraphFile {
    fn from(g: &Graph) -> Self {
        GraphFile { n: g.n(), edges: g.edges() }
    }
}

/// How random edge costs are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCosts {
    /// Integers in `lo..=hi`.
    Integer { lo: u32, hi: u32 },
    /// Reals uniform in `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

/// Erdos-Renyi style directed graph: each ordered pair gets an edge with
/// probability `density`.
pub fn random_graph<R: Rng + ?Sized>(n: usize, density: f64, costs: EdgeCosts, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || !rng.gen_bool(density) {
                continue;
            }
            let c = match costs {
                EdgeCosts::Integer { lo, hi } => rng.gen_range(lo..=hi) as f64,
                EdgeCosts::Uniform { lo, hi } => rng.gen_range(lo..hi),
            };
            edges.push((i, j, c));
        }
    }
    make_graph(n, &edges).expect("generated edges are valid")
}

/// The four-node fixture used throughout the tests.
pub fn g4() -> Graph {
    make_graph(
        4,
        &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 2, 5.0), (1, 3, 5.0), (0, 3, 10.0)],
    )
    .expect("fixture is valid")
}
