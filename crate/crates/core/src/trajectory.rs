//! Flat trajectories and their sub-goal tree representation.

use crate::cost::Cost;
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("malformed sub-goal tree: {0}")]
    MalformedTree(String),
    #[error("cannot split {0} states into a full binary tree (need 2^D + 1)")]
    BadLength(usize),
}

/// A node sequence with its per-step costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub segment_costs: Vec<Cost>,
}

impl Trajectory {
    pub fn new(g: &Graph, states: Vec<usize>) -> Self {
        let segment_costs = states.windows(2).map(|w| g.cost(w[0], w[1])).collect();
        Trajectory { states, segment_costs }
    }

    pub fn total_cost(&self) -> Cost {
        self.segment_costs.iter().copied().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<S> {
    pub midpoint: S,
    pub left: SubGoalTree<S>,
    pub right: SubGoalTree<S>,
}

/// Recursive midpoint tree over a segment `(start, goal)`.
///
/// A node of depth `d > 0` holds a midpoint and two children of depth
/// `d - 1` covering `(start, midpoint)` and `(midpoint, goal)`. Leaves have
/// depth 0 and no midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGoalTree<S> {
    pub start: S,
    pub goal: S,
    pub depth: usize,
    pub split: Option<Box<Split<S>>>,
}

impl<S: Clone + PartialEq> SubGoalTree<S> {
    pub fn leaf(start: S, goal: S) -> Self {
        SubGoalTree { start, goal, depth: 0, split: None }
    }

    pub fn node(start: S, goal: S, midpoint: S, left: SubGoalTree<S>, right: SubGoalTree<S>) -> Self {
        let depth = left.depth.max(right.depth) + 1;
        SubGoalTree { start, goal, depth, split: Some(Box::new(Split { midpoint, left, right })) }
    }

    /// Builds the tree of a `2^D + 1` state sequence by recursive halving.
    pub fn from_states(states: &[S]) -> Result<Self, TreeError> {
        let segments = states.len().checked_sub(1).ok_or(TreeError::BadLength(0))?;
        if segments == 0 || !segments.is_power_of_two() {
            return Err(TreeError::BadLength(states.len()));
        }
        Ok(Self::halve(states))
    }

    fn halve(states: &[S]) -> Self {
        let last = states.len() - 1;
        if last == 1 {
            return Self::leaf(states[0].clone(), states[1].clone());
        }
        let mid = last / 2;
        let left = Self::halve(&states[..=mid]);
        let right = Self::halve(&states[mid..]);
        Self::node(states[0].clone(), states[last].clone(), states[mid].clone(), left, right)
    }

    /// In-order state list of length `2^depth + 1`.
    ///
    /// Repeated states are kept; they cost nothing under the `c(s, s) = 0`
    /// convention.
    pub fn flatten(&self) -> Result<Vec<S>, TreeError> {
        let mut out = Vec::with_capacity((1usize << self.depth) + 1);
        out.push(self.start.clone());
        self.push_interior(&mut out)?;
        out.push(self.goal.clone());
        Ok(out)
    }

    fn push_interior(&self, out: &mut Vec<S>) -> Result<(), TreeError> {
        match (&self.split, self.depth) {
            (None, 0) => Ok(()),
            (None, d) => Err(TreeError::MalformedTree(format!("leaf has depth {d}"))),
            (Some(_), 0) => Err(TreeError::MalformedTree("depth-0 node has a midpoint".into())),
            (Some(split), d) => {
                let Split { midpoint, left, right } = split.as_ref();
                if left.depth + 1 != d || right.depth + 1 != d {
                    return Err(TreeError::MalformedTree(format!(
                        "node of depth {d} has children of depth {} and {}",
                        left.depth, right.depth
                    )));
                }
                if left.start != self.start || left.goal != *midpoint || right.start != *midpoint || right.goal != self.goal {
                    return Err(TreeError::MalformedTree("child endpoints do not match the split".into()));
                }
                left.push_interior(out)?;
                out.push(midpoint.clone());
                right.push_interior(out)
            }
        }
    }
}

/// Flattens a node-id tree and attaches per-step graph costs.
pub fn flatten(tree: &SubGoalTree<usize>, g: &Graph) -> Result<Trajectory, TreeError> {
    Ok(Trajectory::new(g, tree.flatten()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn depth_zero_and_one() {
        let leaf = SubGoalTree::leaf(0usize, 3);
        assert_eq!(leaf.flatten().unwrap(), vec![0, 3]);
        let one = SubGoalTree::node(0usize, 3, 1, SubGoalTree::leaf(0, 1), SubGoalTree::leaf(1, 3));
        assert_eq!(one.flatten().unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn inconsistent_depths_are_rejected() {
        let deep = SubGoalTree::node(0usize, 1, 0, SubGoalTree::leaf(0, 0), SubGoalTree::leaf(0, 1));
        let bad = SubGoalTree::node(0usize, 3, 1, deep, SubGoalTree::leaf(1, 3));
        assert!(matches!(bad.flatten(), Err(TreeError::MalformedTree(_))));

        let mut lying_leaf = SubGoalTree::leaf(0usize, 3);
        lying_leaf.depth = 2;
        assert!(matches!(lying_leaf.flatten(), Err(TreeError::MalformedTree(_))));
    }

    #[test]
    fn mismatched_endpoints_are_rejected() {
        let bad = SubGoalTree::node(0usize, 3, 1, SubGoalTree::leaf(0, 2), SubGoalTree::leaf(1, 3));
        assert!(matches!(bad.flatten(), Err(TreeError::MalformedTree(_))));
    }

    #[test]
    fn from_states_rejects_bad_lengths() {
        assert!(SubGoalTree::<usize>::from_states(&[]).is_err());
        assert!(SubGoalTree::from_states(&[1usize]).is_err());
        assert!(SubGoalTree::from_states(&[1usize, 2, 3, 4]).is_err());
    }

    proptest! {
        #[test]
        fn halving_then_flattening_is_identity(depth in 0usize..6, seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::rng::rng_from_seed(seed);
            let states: Vec<usize> = (0..(1usize << depth) + 1).map(|_| rng.gen_range(0..10)).collect();
            let tree = SubGoalTree::from_states(&states).unwrap();
            prop_assert_eq!(tree.depth, depth);
            prop_assert_eq!(tree.flatten().unwrap(), states);
        }
    }
}
