mod common;

use common::oracles::{self, constant_net};
use parksac::nn::{Adam, GaussianPolicy, Mlp, TwinCritic, ACTION_DIM};
use parksac::sac::{
    actor_loss_and_grad, critic_loss_and_grad, critic_target_with_noise, draw_noise, sac_update, Batch,
    ReplayBuffer, SacConfig, TrainState, Transition,
};
use parksac::seeding::{rng_for, DetRng, Stream};
use parksac::sim::ControlInput;
use rand::Rng;

const BOUNDS: [f64; ACTION_DIM] = [0.5, 1.0];

fn transition(rng: &mut DetRng, obs_dim: usize) -> Transition {
    Transition {
        s: (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        a: ControlInput::new(rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)),
        r: rng.gen_range(-3.0..0.0),
        s_next: (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        done: rng.gen_bool(0.1),
    }
}

fn small_state(seed: u64) -> (TrainState, SacConfig) {
    let cfg = SacConfig {
        hidden: vec![8, 8],
        batch_size: 16,
        buffer_capacity: 500,
        seed,
        ..SacConfig::default()
    };
    let mut state = TrainState::new(&cfg, 4, BOUNDS);
    let mut rng = rng_for(seed, Stream::Rollout, 0);
    for _ in 0..200 {
        state.buffer.push(&transition(&mut rng, 4));
    }
    (state, cfg)
}

#[test]
fn squashed_density_matches_histogram() {
    oracles::squashed_density(5, 1_000_000).unwrap();
}

#[test]
fn polyak_and_terminal_identities() {
    oracles::polyak_and_terminal().unwrap();
}

#[test]
fn default_echo_reproduces_hyperparameter_table() {
    oracles::default_echo().unwrap();
}

#[test]
fn zero_residual_gives_zero_critic_gradient() {
    let mut rng = rng_for(1, Stream::Init, 0);
    let critics = TwinCritic::new(4, &[6], &mut rng);
    let ts: Vec<Transition> = (0..5).map(|_| transition(&mut rng, 4)).collect();
    let batch = Batch::from_transitions(&ts, BOUNDS);
    let mut x = Vec::new();
    for b in 0..batch.size {
        x.extend_from_slice(&batch.obs[b * 4..(b + 1) * 4]);
        x.extend_from_slice(&batch.actions[b * 2..(b + 1) * 2]);
    }
    let y = critics.q1.forward_batch(&x, batch.size).output().to_vec();
    let (loss, grad) = critic_loss_and_grad(&critics.q1, &batch, &y);
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn critic_descends_on_a_frozen_batch() {
    let mut rng = rng_for(2, Stream::Init, 0);
    let mut q = Mlp::init_uniform(&[6, 8, 1], &mut rng);
    let ts: Vec<Transition> = (0..8).map(|_| transition(&mut rng, 4)).collect();
    let batch = Batch::from_transitions(&ts, BOUNDS);
    let y: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut opt = Adam::new(q.num_params());
    let mut prev = f64::INFINITY;
    for step in 0..100 {
        let (loss, grad) = critic_loss_and_grad(&q, &batch, &y);
        assert!(loss <= prev, "step {step}: loss rose from {prev} to {loss}");
        prev = loss;
        opt.step(q.params_mut(), &grad, 1e-3);
    }
}

#[test]
fn actor_gradient_vanishes_without_entropy_and_action_signal() {
    let mut rng = rng_for(3, Stream::Init, 0);
    let policy = GaussianPolicy::new(4, &[6], BOUNDS, &mut rng);
    let critics = TwinCritic {
        q1: constant_net(6, 1.5),
        q2: constant_net(6, -0.5),
    };
    let obs: Vec<f64> = (0..4 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let noise = draw_noise(8, &mut rng);
    let out = actor_loss_and_grad(&policy, &critics, 0.0, &obs, 8, &noise);
    assert!(out.grad.iter().all(|g| g.abs() < 1e-12));
    assert_eq!(out.loss, 0.5);
}

/// Critic `Q = 3 (u_steer + 1) + 3 (1 - u_throttle)` on `[obs(2), u]`:
/// increasing in steer and decreasing in throttle over the unit box.
fn sloped_critic() -> Mlp {
    let mut q = Mlp::zeros(&[4, 2, 1]);
    {
        let w = q.weights_mut(0);
        w[2] = 1.0; // hidden 0 <- u_steer
        w[4 + 3] = -1.0; // hidden 1 <- u_throttle
    }
    q.bias_mut(0).copy_from_slice(&[1.0, 1.0]);
    q.weights_mut(1).copy_from_slice(&[3.0, 3.0]);
    q
}

#[test]
fn actor_moves_toward_the_critic_peak() {
    let mut rng = rng_for(4, Stream::Init, 0);
    let mut policy = GaussianPolicy::new(2, &[6], BOUNDS, &mut rng);
    let critics = TwinCritic {
        q1: sloped_critic(),
        q2: sloped_critic(),
    };
    let obs = vec![0.3, -0.2];
    let before = policy.distribution(&obs).unwrap().0;
    let mut opt = Adam::new(policy.net.num_params());
    for _ in 0..200 {
        let noise = draw_noise(16, &mut rng);
        let batch_obs: Vec<f64> = obs.iter().copied().cycle().take(32).collect();
        let out = actor_loss_and_grad(&policy, &critics, 0.01, &batch_obs, 16, &noise);
        opt.step(policy.net.params_mut(), &out.grad, 1e-2);
    }
    let after = policy.distribution(&obs).unwrap().0;
    assert!(after[0] > before[0] + 0.5, "steer mean {} -> {}", before[0], after[0]);
    assert!(after[1] < before[1] - 0.5, "throttle mean {} -> {}", before[1], after[1]);
}

#[test]
fn zero_temperature_target_is_plain_bellman() {
    let mut rng = rng_for(5, Stream::Init, 0);
    let mut policy = GaussianPolicy::new(4, &[6], BOUNDS, &mut rng);
    // collapse the log-std head: the policy becomes deterministic
    let last = policy.net.layers().len() - 1;
    let width = policy.net.layers()[last].inputs;
    for r in ACTION_DIM..2 * ACTION_DIM {
        for c in 0..width {
            policy.net.weights_mut(last)[r * width + c] = 0.0;
        }
        policy.net.bias_mut(last)[r] = -20.0;
    }
    let targets = TwinCritic::new(4, &[6], &mut rng);
    let ts: Vec<Transition> = (0..6).map(|_| transition(&mut rng, 4)).collect();
    let batch = Batch::from_transitions(&ts, BOUNDS);
    let y = critic_target_with_noise(&batch, &policy, &targets, 0.0, 0.99, &draw_noise(6, &mut rng));
    for (b, t) in ts.iter().enumerate() {
        let (mean, _) = policy.distribution(&t.s_next).unwrap();
        let u = [mean[0].tanh(), mean[1].tanh()];
        let (q1, q2) = targets.q_values(&t.s_next, &u).unwrap();
        let mask = if t.done { 0.0 } else { 1.0 };
        let want = t.r + 0.99 * mask * q1.min(q2);
        assert!((y[b] - want).abs() < 1e-9, "{} vs {}", y[b], want);
    }
}

#[test]
fn ring_buffer_evicts_oldest() {
    let mut rng = rng_for(6, Stream::Init, 0);
    let mut buf = ReplayBuffer::new(2, 4, BOUNDS);
    let ts: Vec<Transition> = (0..3).map(|_| transition(&mut rng, 4)).collect();
    buf.push(&ts[0]);
    assert_eq!(buf.len(), 1);
    for t in &ts[1..] {
        buf.push(t);
    }
    assert_eq!(buf.len(), 2);
    let held: Vec<Transition> = (0..2).map(|i| buf.get(i)).collect();
    assert!(!held.contains(&ts[0]));
    assert!(held.contains(&ts[1]) && held.contains(&ts[2]));
}

#[test]
fn uniform_sampling_passes_chi_squared() {
    let n = 100_000;
    let mut buf = ReplayBuffer::new(n, 1, BOUNDS);
    let t = Transition {
        s: vec![0.0],
        a: ControlInput::new(0.0, 0.0),
        r: 0.0,
        s_next: vec![0.0],
        done: false,
    };
    for _ in 0..n {
        buf.push(&t);
    }
    let mut rng = rng_for(7, Stream::Update, 0);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        let idx = buf.sample_indices(1, &mut rng);
        assert!(idx[0] < buf.len());
        counts[idx[0]] += 1;
    }
    // each bin expects one hit; the statistic has mean n-1 and sd sqrt(2(n-1))
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1.0).powi(2)).sum();
    let dof = (n - 1) as f64;
    assert!((chi2 - dof).abs() < 5.0 * (2.0 * dof).sqrt(), "chi2 {chi2}");
}

#[test]
fn twins_stay_independent_and_targets_follow_polyak() {
    let (mut state, cfg) = small_state(11);
    assert_ne!(state.critics.q1.params(), state.critics.q2.params());
    let mut t1 = state.targets.q1.params().to_vec();
    let mut t2 = state.targets.q2.params().to_vec();
    for _ in 0..15 {
        sac_update(&mut state, &cfg);
        for (t, o) in [(&mut t1, state.critics.q1.params()), (&mut t2, state.critics.q2.params())] {
            for (ti, oi) in t.iter_mut().zip(o) {
                *ti = cfg.tau * oi + (1.0 - cfg.tau) * *ti;
            }
        }
        assert_eq!(state.targets.q1.params(), &t1[..]);
        assert_eq!(state.targets.q2.params(), &t2[..]);
        assert_ne!(state.critics.q1.params(), state.critics.q2.params());
    }
}

/// Largest `|m_hat| / sqrt(v_hat)` Adam can produce at step `t`, by
/// Cauchy-Schwarz over the moment weights.
fn adam_step_bound(b1: f64, b2: f64, t: u64) -> f64 {
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    (1..=t)
        .map(|k| {
            let w = (1.0 - b1) * b1.powi((t - k) as i32) / c1;
            let u = (1.0 - b2) * b2.powi((t - k) as i32) / c2;
            w * w / u
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn temperature_stays_positive_with_bounded_steps() {
    let (mut state, cfg) = small_state(12);
    for _ in 0..40 {
        let before = state.log_alpha;
        sac_update(&mut state, &cfg);
        assert!(state.alpha() > 0.0);
        let t = state.alpha_opt.t;
        let bound = cfg.lr * adam_step_bound(state.alpha_opt.beta1, state.alpha_opt.beta2, t);
        assert!((state.log_alpha - before).abs() <= bound * (1.0 + 1e-12), "step {t}");
    }
}
