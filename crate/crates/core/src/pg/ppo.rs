//! Clipped-ratio surrogate with an entropy bonus, for cost minimisation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PgError;
use crate::nn::GaussianNet;
use crate::optim::{clip_norm, Adam};

pub use super::estimator::Decision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_eps: f64,
    pub entropy_coeff: f64,
    pub lr: f64,
    /// Surrogate steps per collected batch.
    pub epochs: usize,
    /// Gradient L2 cap; `None` disables clipping.
    pub grad_clip: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig { clip_eps: 0.2, entropy_coeff: 1.0, lr: 0.005, epochs: 10, grad_clip: None }
    }
}

/// Optimiser state for one parameter vector. The learning rate may be
/// halved once after a non-finite step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoState {
    pub adam: Adam,
    pub halved: bool,
}

impl PpoState {
    pub fn new(lr: f64) -> Self {
        PpoState { adam: Adam::new(GaussianNet::dim(), lr), halved: false }
    }
}

/// A decision together with its log-probability under the sampling policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OldDecision {
    pub decision: Decision,
    pub old_log_prob: f64,
}

pub fn with_old_log_probs(net: &GaussianNet, decisions: &[Decision]) -> Vec<OldDecision> {
    decisions
        .par_iter()
        .map(|&d| OldDecision { decision: d, old_log_prob: net.log_prob(d.s, d.g, d.x) })
        .collect()
}

/// Mean of `max(r A, clip(r, 1 - eps, 1 + eps) A) - β H` over the batch,
/// where `A` is the cost advantage and `r` the probability ratio, with its
/// gradient. Chunk sums are combined in order so the result does not depend
/// on the thread count.
pub fn surrogate(net: &GaussianNet, batch: &[OldDecision], clip_eps: f64, entropy_coeff: f64) -> (f64, Vec<f64>) {
    let n = batch.len() as f64;
    batch
        .par_chunks(64)
        .map(|chunk| {
            let mut g = vec![0.0; GaussianNet::dim()];
            let mut loss = 0.0;
            for od in chunk {
                let d = od.decision;
                let lp = net.log_prob(d.s, d.g, d.x);
                let r = (lp - od.old_log_prob).exp();
                let unclipped = r * d.advantage;
                let clipped = r.clamp(1.0 - clip_eps, 1.0 + clip_eps) * d.advantage;
                let w_logp = if unclipped >= clipped { unclipped / n } else { 0.0 };
                let le = net.accumulate_grad(d.s, d.g, d.x, w_logp, -entropy_coeff / n, &mut g);
                loss += unclipped.max(clipped) / n - entropy_coeff * le.entropy / n;
            }
            (loss, g)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, vec![0.0; GaussianNet::dim()]), |(la, mut ga), (lb, gb)| {
            ga.iter_mut().zip(gb).for_each(|(x, y)| *x += y);
            (la + lb, ga)
        })
}

/// One Adam step on the surrogate. A non-finite loss, gradient or update
/// aborts the step; the first time, the learning rate is halved and the
/// step retried, after that the error is returned.
pub fn ppo_surrogate_step(net: &mut GaussianNet, batch: &[OldDecision], cfg: &PpoConfig, state: &mut PpoState) -> Result<f64, PgError> {
    if batch.is_empty() {
        return Err(PgError::EmptyBatch);
    }
    loop {
        let (loss, mut grad) = surrogate(net, batch, cfg.clip_eps, cfg.entropy_coeff);
        if let Some(c) = cfg.grad_clip {
            clip_norm(&mut grad, c);
        }
        let mut adam = state.adam.clone();
        let delta = adam.delta(&grad);
        let finite = loss.is_finite() && grad.iter().all(|g| g.is_finite()) && delta.iter().zip(&net.params).all(|(d, p)| (p + d).is_finite());
        if finite {
            net.params.iter_mut().zip(delta).for_each(|(p, d)| *p += d);
            state.adam = adam;
            return Ok(loss);
        }
        if state.halved {
            return Err(PgError::NonFiniteGradient);
        }
        state.halved = true;
        state.adam.lr /= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env2d::State2D;
    use crate::nn::MeanPrior;
    use crate::rng::rng_from_seed;

    fn decision(x: f64, advantage: f64) -> Decision {
        Decision { s: State2D::new(0.2, 0.5), g: State2D::new(0.8, 0.5), x: State2D::new(x, 0.55), advantage }
    }

    #[test]
    fn clipped_term_has_no_gradient() {
        let net = GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(1));
        let d = decision(0.52, -1.0);
        // Old log-probability low enough that the ratio exceeds 1.2.
        let od = OldDecision { decision: d, old_log_prob: net.log_prob(d.s, d.g, d.x) - 1.0 };
        let (_, g) = surrogate(&net, &[od], 0.2, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        let (_, g) = surrogate(&net, &[OldDecision { old_log_prob: od.old_log_prob + 1.0, ..od }], 0.2, 0.0);
        assert!(g.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn one_step_lowers_the_surrogate() {
        let mut net = GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(2));
        let ds: Vec<Decision> = [(0.45, 1.0), (0.55, -1.0), (0.5, 0.3), (0.6, -0.2)].iter().map(|&(x, a)| decision(x, a)).collect();
        let batch = with_old_log_probs(&net, &ds);
        let cfg = PpoConfig { lr: 1e-4, ..Default::default() };
        let before = surrogate(&net, &batch, cfg.clip_eps, cfg.entropy_coeff).0;
        ppo_surrogate_step(&mut net, &batch, &cfg, &mut PpoState::new(cfg.lr)).unwrap();
        let after = surrogate(&net, &batch, cfg.clip_eps, cfg.entropy_coeff).0;
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn entropy_bonus_widens_the_policy() {
        let mut net = GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(3));
        let ds = vec![decision(0.5, 0.0)];
        let batch = with_old_log_probs(&net, &ds);
        let std0 = net.dist(ds[0].s, ds[0].g).std;
        let cfg = PpoConfig::default();
        ppo_surrogate_step(&mut net, &batch, &cfg, &mut PpoState::new(cfg.lr)).unwrap();
        let std1 = net.dist(ds[0].s, ds[0].g).std;
        assert!(std1[0] > std0[0] && std1[1] > std0[1]);
    }

    #[test]
    fn non_finite_halves_once_then_fails() {
        let mut net = GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(4));
        let d = decision(0.5, f64::NAN);
        let batch = with_old_log_probs(&net, &[d]);
        let cfg = PpoConfig::default();
        let mut st = PpoState::new(cfg.lr);
        let before = net.clone();
        assert_eq!(ppo_surrogate_step(&mut net, &batch, &cfg, &mut st), Err(PgError::NonFiniteGradient));
        assert!(st.halved);
        assert_eq!(st.adam.lr, 0.0025);
        assert_eq!(net, before);
    }
}
