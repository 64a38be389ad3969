//! Sub-goal tree dynamic programming for all-pairs shortest paths, with
//! approximate, learned and policy-gradient variants.

pub mod approx;
pub mod bc;
pub mod cost;
pub mod env2d;
pub mod exact;
pub mod graph;
pub mod nn;
pub mod optim;
pub mod perturb;
pub mod pg;
pub mod rng;
pub mod stats;
pub mod trajectory;

pub use cost::{Cost, C_MAX};
pub use graph::{make_graph, trajectory_cost, Graph};
