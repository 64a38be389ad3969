//! A three-state problem small enough to enumerate every sub-goal tree, for
//! checking the estimator in expectation.

use super::tree::{decisions, segment_return, tree_indices};

pub const N_STATES: usize = 3;
const TABLE: usize = N_STATES * N_STATES * N_STATES;

/// Softmax midpoint policy per depth; `logits[d - 1][(s * 3 + g) * 3 + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    pub logits: Vec<[f64; TABLE]>,
}

fn slot(s: usize, g: usize, m: usize) -> usize {
    (s * N_STATES + g) * N_STATES + m
}

impl ToyPolicy {
    pub fn probs(&self, d: usize, s: usize, g: usize) -> [f64; N_STATES] {
        let l = &self.logits[d - 1];
        let mx = (0..N_STATES).map(|m| l[slot(s, g, m)]).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = (0..N_STATES).map(|m| (l[slot(s, g, m)] - mx).exp()).collect();
        let z: f64 = e.iter().sum();
        [e[0] / z, e[1] / z, e[2] / z]
    }

    /// `∇ log π_d(m | s, g)` with respect to `logits[d - 1]`.
    fn score(&self, d: usize, s: usize, g: usize, m: usize) -> [f64; TABLE] {
        let p = self.probs(d, s, g);
        let mut out = [0.0; TABLE];
        for k in 0..N_STATES {
            out[slot(s, g, k)] = f64::from(u8::from(k == m)) - p[k];
        }
        out
    }
}

/// Which return multiplies each score term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnKind {
    /// `C^{i,d}`, the cost inside the decision's own segment.
    Segment,
    /// `C_τ`, the whole trajectory cost.
    Total,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyProblem {
    pub costs: [[f64; N_STATES]; N_STATES],
    pub start: usize,
    pub goal: usize,
    pub depth: usize,
}

impl ToyProblem {
    /// Every trajectory with its probability under `policy`.
    pub fn enumerate(&self, policy: &ToyPolicy) -> Vec<(Vec<usize>, f64)> {
        let order: Vec<(usize, usize)> = decisions(self.depth).collect();
        let n_mid = order.len();
        let mut out = Vec::with_capacity(N_STATES.pow(n_mid as u32));
        for code in 0..N_STATES.pow(n_mid as u32) {
            let mut traj = vec![self.start; (1 << self.depth) + 1];
            traj[1 << self.depth] = self.goal;
            let mut prob = 1.0;
            let mut c = code;
            for &(i, d) in &order {
                let (a, m, b) = tree_indices(i, d, self.depth).expect("enumerated indices are valid");
                let choice = c % N_STATES;
                c /= N_STATES;
                prob *= policy.probs(d, traj[a], traj[b])[choice];
                traj[m] = choice;
            }
            out.push((traj, prob));
        }
        out
    }

    pub fn leaf_costs(&self, traj: &[usize]) -> Vec<f64> {
        traj.windows(2).map(|w| self.costs[w[0]][w[1]]).collect()
    }

    /// Expected trajectory cost.
    pub fn objective(&self, policy: &ToyPolicy) -> f64 {
        self.enumerate(policy).iter().map(|(t, p)| p * self.leaf_costs(t).iter().sum::<f64>()).sum()
    }

    /// Exact expectation of `Σ_i (R^{i,d} - b(s^{i,d}, g^{i,d})) ∇ log π_d`.
    pub fn expected_estimator(&self, policy: &ToyPolicy, d: usize, kind: ReturnKind, baseline: Option<&[[f64; N_STATES]; N_STATES]>) -> Vec<f64> {
        self.expectation(policy, d, |costs, i, a, b| {
            let r = match kind {
                ReturnKind::Segment => segment_return(costs, i, d),
                ReturnKind::Total => costs.iter().sum(),
            };
            r - baseline.map_or(0.0, |t| t[a][b])
        })
    }

    /// Exact expectation of `Σ_i b(s^{i,d}, g^{i,d}) ∇ log π_d`.
    pub fn expected_baseline_term(&self, policy: &ToyPolicy, d: usize, baseline: &[[f64; N_STATES]; N_STATES]) -> Vec<f64> {
        self.expectation(policy, d, |_, _, a, b| baseline[a][b])
    }

    fn expectation(&self, policy: &ToyPolicy, d: usize, weight: impl Fn(&[f64], usize, usize, usize) -> f64) -> Vec<f64> {
        let mut grad = vec![0.0; TABLE];
        for (traj, p) in self.enumerate(policy) {
            let costs = self.leaf_costs(&traj);
            for i in 1..=1usize << (self.depth - d) {
                let (a, m, b) = tree_indices(i, d, self.depth).expect("valid segment");
                let w = p * weight(&costs, i, traj[a], traj[b]);
                for (gk, sk) in grad.iter_mut().zip(policy.score(d, traj[a], traj[b], traj[m])) {
                    *gk += w * sk;
                }
            }
        }
        grad
    }
}
