//! Loss functions and gradient steps of the entropy-regularized actor-critic.
//!
//! Each loss has a `*_loss_and_grad` form that takes the Gaussian noise
//! explicitly. The update functions draw that noise from an rng and apply
//! Adam; tests drive the explicit forms with common random numbers.

use rand::Rng;
use rand_distr::StandardNormal;

use super::buffer::Batch;
use super::TrainState;
use crate::nn::{squash, GaussianPolicy, Mlp, TwinCritic, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN};

/// `batch x ACTION_DIM` standard-normal draws.
pub fn draw_noise<R: Rng + ?Sized>(batch: usize, rng: &mut R) -> Vec<f64> {
    (0..batch * ACTION_DIM).map(|_| rng.sample(StandardNormal)).collect()
}

/// Concatenate observation rows with unit-action rows.
fn critic_input(obs: &[f64], actions: &[f64], batch: usize) -> Vec<f64> {
    let d = obs.len() / batch.max(1);
    let mut x = Vec::with_capacity(batch * (d + ACTION_DIM));
    for b in 0..batch {
        x.extend_from_slice(&obs[b * d..(b + 1) * d]);
        x.extend_from_slice(&actions[b * ACTION_DIM..(b + 1) * ACTION_DIM]);
    }
    x
}

/// Squashed samples for a batch of policy outputs.
struct PolicySamples {
    unit: Vec<f64>,
    log_prob: Vec<f64>,
    /// `exp(log_std)` after clamping.
    std: Vec<f64>,
    /// 1 where the raw log-std lies inside the clamp range.
    log_std_live: Vec<f64>,
}

fn sample_policy(out: &[f64], noise: &[f64], bounds: [f64; ACTION_DIM], batch: usize) -> PolicySamples {
    let mut s = PolicySamples {
        unit: Vec::with_capacity(batch * ACTION_DIM),
        log_prob: Vec::with_capacity(batch),
        std: Vec::with_capacity(batch * ACTION_DIM),
        log_std_live: Vec::with_capacity(batch * ACTION_DIM),
    };
    for b in 0..batch {
        let row = &out[b * 2 * ACTION_DIM..(b + 1) * 2 * ACTION_DIM];
        let (mean, log_std) = GaussianPolicy::heads(row);
        let xi = [noise[b * ACTION_DIM], noise[b * ACTION_DIM + 1]];
        let sq = squash(mean, log_std, xi, bounds);
        s.unit.extend_from_slice(&sq.unit);
        s.log_prob.push(sq.log_prob);
        for i in 0..ACTION_DIM {
            s.std.push(log_std[i].exp());
            let raw = row[ACTION_DIM + i];
            s.log_std_live.push(if raw > LOG_STD_MIN && raw < LOG_STD_MAX { 1.0 } else { 0.0 });
        }
    }
    s
}

/// Per-sample soft Bellman target
/// `y = r + gamma * (1 - done) * (min_j Qbar_j(s', a') - alpha * log pi(a'|s'))`
/// with `a'` drawn from the current policy using `noise`.
pub fn critic_target_with_noise(
    batch: &Batch,
    policy: &GaussianPolicy,
    targets: &TwinCritic,
    alpha: f64,
    gamma: f64,
    noise: &[f64],
) -> Vec<f64> {
    let n = batch.size;
    assert!(n > 0, "critic target on an empty batch");
    let acts = policy.net.forward_batch(&batch.next_obs, n);
    let s = sample_policy(acts.output(), noise, policy.bounds, n);
    let x = critic_input(&batch.next_obs, &s.unit, n);
    let q1 = targets.q1.forward_batch(&x, n);
    let q2 = targets.q2.forward_batch(&x, n);
    (0..n)
        .map(|b| {
            let soft = q1.output()[b].min(q2.output()[b]) - alpha * s.log_prob[b];
            batch.rewards[b] + gamma * (1.0 - batch.dones[b]) * soft
        })
        .collect()
}

pub fn critic_target<R: Rng + ?Sized>(
    batch: &Batch,
    policy: &GaussianPolicy,
    targets: &TwinCritic,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> Vec<f64> {
    let noise = draw_noise(batch.size, rng);
    critic_target_with_noise(batch, policy, targets, alpha, gamma, &noise)
}

/// Mean squared residual `mean_b (Q(s_b, a_b) - y_b)^2` and its parameter
/// gradient, with `y` held constant.
pub fn critic_loss_and_grad(q: &Mlp, batch: &Batch, y: &[f64]) -> (f64, Vec<f64>) {
    let n = batch.size;
    let x = critic_input(&batch.obs, &batch.actions, n);
    let acts = q.forward_batch(&x, n);
    let mut loss = 0.0;
    let mut d_out = Vec::with_capacity(n);
    for b in 0..n {
        let r = acts.output()[b] - y[b];
        loss += r * r;
        d_out.push(2.0 * r / n as f64);
    }
    let mut grad = vec![0.0; q.num_params()];
    q.backward_batch(&acts, &d_out, Some(&mut grad), false);
    (loss / n as f64, grad)
}

pub struct ActorLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub mean_log_prob: f64,
}

/// `mean_b [alpha * log pi(a_b|s_b) - min(Q1, Q2)(s_b, a_b)]` with
/// reparameterized `a_b`, and its gradient with respect to the policy
/// parameters only.
pub fn actor_loss_and_grad(
    policy: &GaussianPolicy,
    critics: &TwinCritic,
    alpha: f64,
    obs: &[f64],
    batch: usize,
    noise: &[f64],
) -> ActorLoss {
    let n = batch;
    let inv_n = 1.0 / n as f64;
    let p_acts = policy.net.forward_batch(obs, n);
    let s = sample_policy(p_acts.output(), noise, policy.bounds, n);
    let x = critic_input(obs, &s.unit, n);
    let a1 = critics.q1.forward_batch(&x, n);
    let a2 = critics.q2.forward_batch(&x, n);

    let mut loss = 0.0;
    let mut up1 = vec![0.0; n];
    let mut up2 = vec![0.0; n];
    for b in 0..n {
        let (q1, q2) = (a1.output()[b], a2.output()[b]);
        let qmin = if q1 <= q2 {
            up1[b] = -inv_n;
            q1
        } else {
            up2[b] = -inv_n;
            q2
        };
        loss += alpha * s.log_prob[b] - qmin;
    }
    let dx1 = critics.q1.backward_batch(&a1, &up1, None, true).unwrap();
    let dx2 = critics.q2.backward_batch(&a2, &up2, None, true).unwrap();

    let in_dim = critics.q1.input_dim();
    let obs_dim = in_dim - ACTION_DIM;
    let mut d_out = vec![0.0; n * 2 * ACTION_DIM];
    for b in 0..n {
        for i in 0..ACTION_DIM {
            let k = b * ACTION_DIM + i;
            let u = s.unit[k];
            let dq_du = dx1[b * in_dim + obs_dim + i] + dx2[b * in_dim + obs_dim + i];
            // d/dz of alpha*log pi is alpha * 2 tanh(z) through the squash correction
            let dz = alpha * inv_n * 2.0 * u + dq_du * (1.0 - u * u);
            d_out[b * 2 * ACTION_DIM + i] = dz;
            let dlog_std = -alpha * inv_n + dz * s.std[k] * noise[k];
            d_out[b * 2 * ACTION_DIM + ACTION_DIM + i] = dlog_std * s.log_std_live[k];
        }
    }
    let mut grad = vec![0.0; policy.net.num_params()];
    policy.net.backward_batch(&p_acts, &d_out, Some(&mut grad), false);
    ActorLoss {
        loss: loss * inv_n,
        grad,
        mean_log_prob: s.log_prob.iter().sum::<f64>() * inv_n,
    }
}

/// Temperature surrogate `mean_b [-alpha * (log pi_b + target_entropy)]`
/// with `alpha = exp(log_alpha)`, and its derivative in `log_alpha`.
pub fn temperature_loss_and_grad(log_alpha: f64, log_probs: &[f64], target_entropy: f64) -> (f64, f64) {
    let alpha = log_alpha.exp();
    let mean = log_probs.iter().map(|lp| lp + target_entropy).sum::<f64>() / log_probs.len() as f64;
    (-alpha * mean, -alpha * mean)
}

/// Log-probabilities of fresh policy samples at `obs`.
pub fn sample_log_probs(policy: &GaussianPolicy, obs: &[f64], batch: usize, noise: &[f64]) -> Vec<f64> {
    let acts = policy.net.forward_batch(obs, batch);
    sample_policy(acts.output(), noise, policy.bounds, batch).log_prob
}

/// One Adam step on each online critic. Returns `(loss1, loss2)`.
pub fn critic_update<R: Rng + ?Sized>(
    state: &mut TrainState,
    batch: &Batch,
    gamma: f64,
    lr: f64,
    rng: &mut R,
) -> (f64, f64) {
    let y = critic_target(batch, &state.policy, &state.targets, state.alpha(), gamma, rng);
    let (l1, g1) = critic_loss_and_grad(&state.critics.q1, batch, &y);
    let (l2, g2) = critic_loss_and_grad(&state.critics.q2, batch, &y);
    state.q1_opt.step(state.critics.q1.params_mut(), &g1, lr);
    state.q2_opt.step(state.critics.q2.params_mut(), &g2, lr);
    (l1, l2)
}

/// One Adam step on the policy against the (frozen) online critics.
pub fn actor_update<R: Rng + ?Sized>(state: &mut TrainState, batch: &Batch, lr: f64, rng: &mut R) -> f64 {
    let noise = draw_noise(batch.size, rng);
    let out = actor_loss_and_grad(&state.policy, &state.critics, state.alpha(), &batch.obs, batch.size, &noise);
    state.policy_opt.step(state.policy.net.params_mut(), &out.grad, lr);
    out.loss
}

/// One Adam step on `log_alpha` using fresh policy samples. Returns the new
/// temperature.
pub fn temperature_update<R: Rng + ?Sized>(
    state: &mut TrainState,
    batch: &Batch,
    target_entropy: f64,
    lr: f64,
    rng: &mut R,
) -> f64 {
    let noise = draw_noise(batch.size, rng);
    let lps = sample_log_probs(&state.policy, &batch.obs, batch.size, &noise);
    let (_, g) = temperature_loss_and_grad(state.log_alpha, &lps, target_entropy);
    let mut la = [state.log_alpha];
    state.alpha_opt.step(&mut la, &[g], lr);
    state.log_alpha = la[0];
    state.alpha()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::{rng_for, Stream};
    use crate::sim::ControlInput;
    use crate::sac::buffer::Transition;

    fn constant_critic(obs_dim: usize, value: f64) -> Mlp {
        let mut q = Mlp::zeros(&[obs_dim + ACTION_DIM, 3, 1]);
        let last = q.layers().len() - 1;
        q.bias_mut(last)[0] = value;
        q
    }

    fn batch(done: bool, r: f64) -> Batch {
        let t = Transition {
            s: vec![0.1, -0.2, 0.3],
            a: ControlInput::new(0.1, 0.5),
            r,
            s_next: vec![0.2, 0.0, -0.1],
            done,
        };
        Batch::from_transitions(&[t.clone(), t], [0.5, 1.0])
    }

    fn policy() -> GaussianPolicy {
        GaussianPolicy::new(3, &[4], [0.5, 1.0], &mut rng_for(0, Stream::Init, 0))
    }

    #[test]
    fn terminal_target_is_reward() {
        let targets = TwinCritic {
            q1: constant_critic(3, 40.0),
            q2: constant_critic(3, 50.0),
        };
        let y = critic_target_with_noise(&batch(true, 5.0), &policy(), &targets, 0.7, 0.99, &[0.3; 4]);
        assert_eq!(y, vec![5.0, 5.0]);
    }

    #[test]
    fn bootstrap_uses_min_target() {
        let targets = TwinCritic {
            q1: constant_critic(3, 2.0),
            q2: constant_critic(3, 3.0),
        };
        let y = critic_target_with_noise(&batch(false, 1.0), &policy(), &targets, 0.0, 0.99, &[0.3; 4]);
        for v in y {
            assert!((v - 2.98).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_term_sign() {
        let targets = TwinCritic {
            q1: constant_critic(3, 2.0),
            q2: constant_critic(3, 3.0),
        };
        let b = batch(false, 1.0);
        let pol = policy();
        let noise = [0.3, -0.1, 0.3, -0.1];
        let lp = sample_log_probs(&pol, &b.next_obs, 2, &noise);
        let y0 = critic_target_with_noise(&b, &pol, &targets, 0.0, 0.99, &noise);
        let y1 = critic_target_with_noise(&b, &pol, &targets, 0.2, 0.99, &noise);
        for i in 0..2 {
            if lp[i] > 0.0 {
                assert!(y1[i] < y0[i]);
            } else {
                assert!(y1[i] > y0[i]);
            }
        }
    }

    #[test]
    fn temperature_stationary_at_target() {
        let (_, g) = temperature_loss_and_grad(0.3, &[2.0, 2.0], -2.0);
        assert_eq!(g, 0.0);
        // log pi far above -target_entropy: the gradient is negative, so
        // descent raises log_alpha
        let (_, g) = temperature_loss_and_grad(0.3, &[5.0, 6.0], -2.0);
        assert!(g < 0.0);
    }
}
