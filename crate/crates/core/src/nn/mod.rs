//! Small dense-network kernel: MLPs with exact reverse-mode gradients, Adam,
//! the tanh-squashed Gaussian policy and Polyak target updates.

mod adam;
mod mlp;
mod policy;

pub use adam::Adam;
pub use mlp::{Activations, LayerShape, Mlp};
pub use policy::{
    log_one_minus_tanh_sq, squash, squashed_log_prob, GaussianPolicy, SquashedSample, TwinCritic,
    ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("{what}: expected length {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn polyak_update(target: &mut [f64], online: &[f64], tau: f64) {
    assert_eq!(target.len(), online.len(), "polyak_update: shape mismatch");
    assert!((0.0..=1.0).contains(&tau), "polyak_update: tau outside [0, 1]");
    if tau == 1.0 {
        target.copy_from_slice(online);
        return;
    }
    for (t, &o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyak_edges() {
        let online = [1.0, -2.0, 3.5];
        let mut t = [0.25, 0.5, -1.0];
        polyak_update(&mut t, &online, 0.0);
        assert_eq!(t, [0.25, 0.5, -1.0]);
        polyak_update(&mut t, &online, 1.0);
        assert_eq!(t, online);
        let mut z = [0.0];
        polyak_update(&mut z, &[1.0], 0.05);
        assert_eq!(z, [0.05]);
    }
}
