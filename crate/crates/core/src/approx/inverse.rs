//! Nearest-neighbour inverse model `(s, s') -> action`.

use super::knn::{knn_classifier, KnnClassifier};
use super::{pair_features, ApproxError};
use crate::env2d::{State2D, TransitionTuple};

#[derive(Debug, Clone)]
pub struct InverseModel {
    clf: KnnClassifier<4>,
    step_size: f64,
}

pub fn fit_inverse_model(data: &[TransitionTuple], k: usize, step_size: f64) -> Result<InverseModel, ApproxError> {
    let rows = data.iter().map(|t| (pair_features(t.s, t.s_next), t.u)).collect();
    Ok(InverseModel { clf: knn_classifier(rows, k)?, step_size })
}

impl InverseModel {
    /// Majority action among the nearest stored transitions.
    pub fn predict(&self, s: State2D, s_next: State2D) -> usize {
        self.clf.predict(&pair_features(s, s_next))
    }

    /// Action toward a possibly distant target. The model only saw one-step
    /// transitions, so the query successor is the point one step along the
    /// straight line to `target`.
    pub fn action_toward(&self, s: State2D, target: State2D) -> usize {
        let d = s.dist(target);
        let q = if d > self.step_size { s.lerp(target, self.step_size / d) } else { target };
        self.predict(s, q)
    }
}
