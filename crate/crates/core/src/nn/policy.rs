use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Mlp, NnError};
use crate::sim::ControlInput;

/// Steering and throttle.
pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HEAD_INIT_SCALE: f64 = 0.01;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(z)^2)` without cancellation for large `|z|`.
pub fn log_one_minus_tanh_sq(z: f64) -> f64 {
    2.0 * (LN_2 - z - softplus(-2.0 * z))
}

/// A reparameterized draw `z = mean + exp(log_std) * noise` pushed through
/// `tanh`, with the log-density of the bounded action `bound * tanh(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquashedSample {
    pub z: [f64; ACTION_DIM],
    /// `tanh(z)`, the action divided by its bound.
    pub unit: [f64; ACTION_DIM],
    pub log_prob: f64,
}

pub fn squash(
    mean: [f64; ACTION_DIM],
    log_std: [f64; ACTION_DIM],
    noise: [f64; ACTION_DIM],
    bounds: [f64; ACTION_DIM],
) -> SquashedSample {
    let mut z = [0.0; ACTION_DIM];
    let mut unit = [0.0; ACTION_DIM];
    let mut log_prob = 0.0;
    for i in 0..ACTION_DIM {
        z[i] = mean[i] + log_std[i].exp() * noise[i];
        unit[i] = z[i].tanh();
        log_prob += -0.5 * noise[i] * noise[i] - log_std[i] - 0.5 * (2.0 * PI).ln()
            - log_one_minus_tanh_sq(z[i])
            - bounds[i].ln();
    }
    SquashedSample { z, unit, log_prob }
}

/// Log-density of a bounded action under the squashed Gaussian. Returns
/// `-inf` on or outside the bounds.
pub fn squashed_log_prob(
    mean: [f64; ACTION_DIM],
    log_std: [f64; ACTION_DIM],
    action: [f64; ACTION_DIM],
    bounds: [f64; ACTION_DIM],
) -> f64 {
    let mut lp = 0.0;
    for i in 0..ACTION_DIM {
        let u = action[i] / bounds[i];
        if u.abs() >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let z = u.atanh();
        let xi = (z - mean[i]) / log_std[i].exp();
        lp += -0.5 * xi * xi - log_std[i] - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(z)
            - bounds[i].ln();
    }
    lp
}

/// Gaussian policy with tanh squashing. The network's four outputs are the
/// mean head (`[0..2]`) and the log-std head (`[2..4]`), both linear in the
/// last hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    /// Action half-ranges: `(max_steer, 1)`.
    pub bounds: [f64; ACTION_DIM],
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        bounds: [f64; ACTION_DIM],
        rng: &mut R,
    ) -> Self {
        let sizes = Self::layer_sizes(obs_dim, hidden);
        let mut net = Mlp::init_uniform(&sizes, rng);
        let last = net.layers().len() - 1;
        for w in net.weights_mut(last) {
            *w *= HEAD_INIT_SCALE;
        }
        for b in net.bias_mut(last) {
            *b *= HEAD_INIT_SCALE;
        }
        Self { net, bounds }
    }

    pub fn layer_sizes(obs_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * ACTION_DIM);
        sizes
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Split raw network output into mean and clamped log-std.
    pub fn heads(out: &[f64]) -> ([f64; ACTION_DIM], [f64; ACTION_DIM]) {
        let mut mean = [0.0; ACTION_DIM];
        let mut log_std = [0.0; ACTION_DIM];
        for i in 0..ACTION_DIM {
            mean[i] = out[i];
            log_std[i] = out[ACTION_DIM + i].clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        (mean, log_std)
    }

    pub fn distribution(&self, obs: &[f64]) -> Result<([f64; ACTION_DIM], [f64; ACTION_DIM]), NnError> {
        let out = self.net.forward(obs)?;
        Ok(Self::heads(&out))
    }

    pub fn to_control(&self, unit: [f64; ACTION_DIM]) -> ControlInput {
        ControlInput::new(self.bounds[0] * unit[0], self.bounds[1] * unit[1])
    }

    pub fn to_unit(&self, action: &ControlInput) -> [f64; ACTION_DIM] {
        [action.steer / self.bounds[0], action.throttle / self.bounds[1]]
    }

    /// Stochastic action and its log-probability.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(ControlInput, f64), NnError> {
        let (mean, log_std) = self.distribution(obs)?;
        let noise = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let s = squash(mean, log_std, noise, self.bounds);
        Ok((self.to_control(s.unit), s.log_prob))
    }

    /// `bound * tanh(mean)`, used for evaluation.
    pub fn act_deterministic(&self, obs: &[f64]) -> Result<ControlInput, NnError> {
        let (mean, _) = self.distribution(obs)?;
        Ok(self.to_control([mean[0].tanh(), mean[1].tanh()]))
    }
}

/// Two independently initialized Q-networks over `[observation, action / bound]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinCritic {
    pub q1: Mlp,
    pub q2: Mlp,
}

impl TwinCritic {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let sizes = Self::layer_sizes(obs_dim, hidden);
        let q1 = Mlp::init_uniform(&sizes, rng);
        let q2 = Mlp::init_uniform(&sizes, rng);
        Self { q1, q2 }
    }

    pub fn layer_sizes(obs_dim: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![obs_dim + ACTION_DIM];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        sizes
    }

    pub fn nets(&self) -> [&Mlp; 2] {
        [&self.q1, &self.q2]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp; 2] {
        [&mut self.q1, &mut self.q2]
    }

    /// `(q1, q2)` for one observation and unit-scaled action.
    pub fn q_values(&self, obs: &[f64], unit_action: &[f64; ACTION_DIM]) -> Result<(f64, f64), NnError> {
        let mut x = obs.to_vec();
        x.extend_from_slice(unit_action);
        Ok((self.q1.forward(&x)?[0], self.q2.forward(&x)?[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{rng_for, Stream};

    #[test]
    fn stable_tanh_correction() {
        for z in [-30.0, -3.0, -0.2, 0.0, 0.7, 4.0, 30.0f64] {
            let direct = (1.0 - z.tanh().powi(2)).ln();
            let stable = log_one_minus_tanh_sq(z);
            assert!(stable.is_finite());
            if z.abs() < 5.0 {
                assert!((direct - stable).abs() < 1e-10, "z={z}");
            }
        }
    }

    #[test]
    fn collapsed_std_is_deterministic() {
        let bounds = [0.5, 1.0];
        let mean = [0.3, -1.2];
        let a = squash(mean, [LOG_STD_MIN; 2], [1.5, -2.0], bounds);
        let b = squash(mean, [LOG_STD_MIN; 2], [-0.4, 0.9], bounds);
        for i in 0..2 {
            assert!((a.unit[i] - mean[i].tanh()).abs() < 1e-8);
            assert!((a.unit[i] - b.unit[i]).abs() < 1e-8);
        }
        assert!(a.log_prob.is_finite());
    }

    #[test]
    fn log_prob_agrees_with_density_formula() {
        let bounds = [30f64.to_radians(), 1.0];
        let (mean, log_std) = ([0.2, -0.5], [-0.3, 0.4]);
        let s = squash(mean, log_std, [0.7, -1.1], bounds);
        let action = [bounds[0] * s.unit[0], bounds[1] * s.unit[1]];
        let lp = squashed_log_prob(mean, log_std, action, bounds);
        assert!((lp - s.log_prob).abs() < 1e-9);
        assert_eq!(squashed_log_prob(mean, log_std, [bounds[0], 0.0], bounds), f64::NEG_INFINITY);
    }

    #[test]
    fn sampled_actions_respect_bounds() {
        let mut rng = rng_for(1, Stream::Init, 0);
        let mut pol = GaussianPolicy::new(5, &[8, 8], [30f64.to_radians(), 1.0], &mut rng);
        // widen the distribution so samples hit the saturated tails
        let last = pol.net.layers().len() - 1;
        for b in pol.net.bias_mut(last).iter_mut().skip(2) {
            *b = 2.0;
        }
        for i in 0..2000 {
            let obs: Vec<f64> = (0..5).map(|k| ((i * 5 + k) as f64).sin() * 3.0).collect();
            let (a, lp) = pol.sample(&obs, &mut rng).unwrap();
            assert!(a.steer.abs() <= pol.bounds[0]);
            assert!(a.throttle.abs() <= 1.0);
            assert!(lp.is_finite());
        }
    }

    #[test]
    fn twin_critics_do_not_share_parameters() {
        let mut rng = rng_for(2, Stream::Init, 0);
        let c = TwinCritic::new(4, &[8, 8], &mut rng);
        assert_eq!(c.q1.sizes(), c.q2.sizes());
        assert_ne!(c.q1.params(), c.q2.params());
    }
}
