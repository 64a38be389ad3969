//! A small tanh network with hand-written reverse mode, and the diagonal
//! Gaussian sub-goal head built on it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env2d::State2D;

/// Layer widths: `(s, g)` in, two mean offsets and two raw stds out.
pub const LAYERS: [usize; 5] = [4, 20, 20, 20, 4];
pub const STD_FLOOR: f64 = 0.05;
/// Initial value of the raw std outputs and distance coefficients;
/// `softplus(INIT_RAW_STD) = 0.05`.
pub const INIT_RAW_STD: f64 = -2.970_628_109_057_377;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn mlp_param_count() -> usize {
    LAYERS.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Hidden activations kept for the backward pass; `acts[0]` is the input.
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

/// Output of the network at `x`. Parameters are stored layer by layer,
/// each as a row-major `out x in` weight block followed by the biases.
pub fn mlp_forward(params: &[f64], x: &[f64]) -> (Vec<f64>, MlpCache) {
    let mut acts = vec![x.to_vec()];
    let mut off = 0;
    let last = LAYERS.len() - 2;
    for (l, w) in LAYERS.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let input = acts.last().unwrap();
        let (wts, rest) = params[off..].split_at(n_in * n_out);
        let bias = &rest[..n_out];
        let mut out: Vec<f64> = (0..n_out)
            .map(|o| bias[o] + wts[o * n_in..(o + 1) * n_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        if l < last {
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
        acts.push(out);
        off += n_in * n_out + n_out;
    }
    let out = acts.pop().unwrap();
    (out, MlpCache { acts })
}

/// Adds `J^T dout` to `grad`.
pub fn mlp_backward(params: &[f64], cache: &MlpCache, dout: &[f64], grad: &mut [f64]) {
    let mut offsets = Vec::with_capacity(LAYERS.len() - 1);
    let mut off = 0;
    for w in LAYERS.windows(2) {
        offsets.push(off);
        off += w[0] * w[1] + w[1];
    }
    let mut delta = dout.to_vec();
    for l in (0..LAYERS.len() - 1).rev() {
        let (n_in, n_out) = (LAYERS[l], LAYERS[l + 1]);
        let input = &cache.acts[l];
        let base = offsets[l];
        for o in 0..n_out {
            let row = base + o * n_in;
            for i in 0..n_in {
                grad[row + i] += delta[o] * input[i];
            }
            grad[base + n_in * n_out + o] += delta[o];
        }
        if l == 0 {
            break;
        }
        // input[i] = tanh(pre), so d pre = d input * (1 - input^2)
        delta = (0..n_in)
            .map(|i| {
                let back: f64 = (0..n_out).map(|o| params[base + o * n_in + i] * delta[o]).sum();
                back * (1.0 - input[i] * input[i])
            })
            .collect();
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Where the Gaussian mean is anchored before the learned offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanPrior {
    /// `(s + g) / 2`, for midpoint predictors.
    Midpoint,
    /// `s`, for next-state predictors.
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagGaussian {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

/// `N(mean(s, g), diag(std(s, g))^2)` over the next sub-goal, with
/// `std = softplus(raw) + 0.05 + softplus(coef) * |s - g|` per dimension.
/// `params` holds the network followed by the two distance coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNet {
    pub prior: MeanPrior,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogProbEntropy {
    pub log_prob: f64,
    pub entropy: f64,
}

impl GaussianNet {
    pub fn dim() -> usize {
        mlp_param_count() + 2
    }

    /// Small uniform weights, zero biases, zero weights into the mean
    /// outputs, and raw stds starting at `INIT_RAW_STD`.
    pub fn new<R: Rng + ?Sized>(prior: MeanPrior, rng: &mut R) -> Self {
        let mut params = Vec::with_capacity(Self::dim());
        let last = LAYERS.len() - 2;
        for (l, w) in LAYERS.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            for o in 0..n_out {
                for _ in 0..n_in {
                    let v: f64 = rng.gen_range(-0.05..0.05);
                    params.push(if l == last && o < 2 { 0.0 } else { v });
                }
            }
            for o in 0..n_out {
                params.push(if l == last && o >= 2 { INIT_RAW_STD } else { 0.0 });
            }
        }
        params.extend([INIT_RAW_STD; 2]);
        GaussianNet { prior, params }
    }

    /// Every parameter zero.
    pub fn zeros(prior: MeanPrior) -> Self {
        GaussianNet { prior, params: vec![0.0; Self::dim()] }
    }

    fn coef(&self, j: usize) -> f64 {
        self.params[mlp_param_count() + j]
    }

    fn anchor(&self, s: State2D, g: State2D) -> [f64; 2] {
        match self.prior {
            MeanPrior::Midpoint => [(s.x + g.x) / 2.0, (s.y + g.y) / 2.0],
            MeanPrior::Current => [s.x, s.y],
        }
    }

    fn head(&self, s: State2D, g: State2D) -> (DiagGaussian, Vec<f64>, MlpCache) {
        let (out, cache) = mlp_forward(&self.params, &[s.x, s.y, g.x, g.y]);
        let a = self.anchor(s, g);
        let dist = s.dist(g);
        let mut d = DiagGaussian { mean: [0.0; 2], std: [0.0; 2] };
        for j in 0..2 {
            d.mean[j] = a[j] + out[j];
            d.std[j] = softplus(out[2 + j]) + STD_FLOOR + softplus(self.coef(j)) * dist;
        }
        (d, out, cache)
    }

    pub fn dist(&self, s: State2D, g: State2D) -> DiagGaussian {
        self.head(s, g).0
    }

    pub fn mean(&self, s: State2D, g: State2D) -> State2D {
        let m = self.dist(s, g).mean;
        State2D::new(m[0], m[1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: State2D, g: State2D, rng: &mut R) -> State2D {
        let d = self.dist(s, g);
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        State2D::new(d.mean[0] + d.std[0] * z0, d.mean[1] + d.std[1] * z1)
    }

    pub fn log_prob(&self, s: State2D, g: State2D, x: State2D) -> f64 {
        log_density(&self.dist(s, g), x)
    }

    pub fn entropy(&self, s: State2D, g: State2D) -> f64 {
        entropy(&self.dist(s, g))
    }

    /// Adds `w_logp * ∇ log p(x | s, g) + w_ent * ∇ H(s, g)` to `grad`.
    pub fn accumulate_grad(&self, s: State2D, g: State2D, x: State2D, w_logp: f64, w_ent: f64, grad: &mut [f64]) -> LogProbEntropy {
        let (d, out, cache) = self.head(s, g);
        let xs = [x.x, x.y];
        let dist = s.dist(g);
        let mut dout = [0.0; 4];
        for j in 0..2 {
            let z = (xs[j] - d.mean[j]) / d.std[j];
            dout[j] = w_logp * z / d.std[j];
            let dstd = w_logp * (z * z - 1.0) / d.std[j] + w_ent / d.std[j];
            dout[2 + j] = dstd * sigmoid(out[2 + j]);
            grad[mlp_param_count() + j] += dstd * sigmoid(self.coef(j)) * dist;
        }
        mlp_backward(&self.params, &cache, &dout, grad);
        LogProbEntropy { log_prob: log_density(&d, x), entropy: entropy(&d) }
    }
}

pub fn log_density(d: &DiagGaussian, x: State2D) -> f64 {
    let xs = [x.x, x.y];
    (0..2)
        .map(|j| {
            let z = (xs[j] - d.mean[j]) / d.std[j];
            -0.5 * z * z - d.std[j].ln() - 0.5 * LN_2PI
        })
        .sum()
}

pub fn entropy(d: &DiagGaussian) -> f64 {
    d.std.iter().map(|s| s.ln() + 0.5 * (LN_2PI + 1.0)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn initial_std_constant() {
        assert!((softplus(INIT_RAW_STD) - 0.05).abs() < 1e-12);
        assert_eq!(GaussianNet::dim(), 1026);
    }

    #[test]
    fn fresh_net_predicts_the_midpoint() {
        let net = GaussianNet::new(MeanPrior::Midpoint, &mut rng_from_seed(0));
        let (s, g) = (State2D::new(0.1, 0.2), State2D::new(0.7, 0.9));
        let m = net.mean(s, g);
        assert_eq!((m.x, m.y), ((s.x + g.x) / 2.0, (s.y + g.y) / 2.0));
        let d = net.dist(s, g);
        assert!(d.std.iter().all(|&v| v > STD_FLOOR));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng_from_seed(3);
        let mut net = GaussianNet::new(MeanPrior::Midpoint, &mut rng);
        for p in net.params.iter_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let (s, g, x) = (State2D::new(0.2, 0.3), State2D::new(0.8, 0.5), State2D::new(0.45, 0.5));
        let f = |n: &GaussianNet| n.log_prob(s, g, x) + 0.7 * n.entropy(s, g);
        let mut grad = vec![0.0; GaussianNet::dim()];
        net.accumulate_grad(s, g, x, 1.0, 0.7, &mut grad);
        let h = 1e-6;
        for k in (0..GaussianNet::dim()).step_by(37).chain([1024, 1025]) {
            let mut a = net.clone();
            a.params[k] += h;
            let mut b = net.clone();
            b.params[k] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            assert!((fd - grad[k]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", grad[k]);
        }
    }
}
