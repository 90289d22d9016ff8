//! Finite-difference oracles for the loss gradients.

use parksac::nn::{GaussianPolicy, Mlp, TwinCritic, ACTION_DIM};
use parksac::sac::{
    actor_loss_and_grad, critic_loss_and_grad, draw_noise, temperature_loss_and_grad, Batch, Transition,
};
use parksac::seeding::{rng_for, DetRng, Stream};
use parksac::sim::ControlInput;
use rand::Rng;

pub const H: f64 = 1e-6;
pub const FIXTURES: u64 = 24;
pub const BOUNDS: [f64; ACTION_DIM] = [0.6, 1.0];

/// Relative error of two gradient vectors, measured against the larger norm.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = norm(analytic).max(norm(numeric)).max(1e-12);
    diff / scale
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn central_diff(params: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + H;
            let up = loss(&p);
            p[i] = orig - H;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

/// Random network shape and rng for fixture `k`.
pub fn fixture(k: u64) -> (usize, Vec<usize>, usize, DetRng) {
    let mut rng = rng_for(k, Stream::Init, 99);
    let obs_dim = rng.gen_range(2..6);
    let hidden = if k % 2 == 0 {
        vec![rng.gen_range(3..7)]
    } else {
        vec![rng.gen_range(3..6), rng.gen_range(2..5)]
    };
    let batch = rng.gen_range(1..5);
    (obs_dim, hidden, batch, rng)
}

pub fn random_batch(obs_dim: usize, n: usize, rng: &mut DetRng) -> Batch {
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            s: (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            a: ControlInput::new(
                rng.gen_range(-BOUNDS[0]..BOUNDS[0]),
                rng.gen_range(-BOUNDS[1]..BOUNDS[1]),
            ),
            r: rng.gen_range(-2.0..1.0),
            s_next: (0..obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            done: rng.gen_bool(0.3),
        })
        .collect();
    Batch::from_transitions(&ts, BOUNDS)
}

/// Spread the policy weights so the heads carry real signal; the default
/// initialization keeps them near zero.
pub fn jitter(net: &mut Mlp, rng: &mut DetRng, scale: f64) {
    for p in net.params_mut() {
        *p += rng.gen_range(-scale..scale);
    }
}

/// Worst relative error over all critic fixtures.
pub fn critic_max_err() -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..FIXTURES {
        let (obs_dim, hidden, n, mut rng) = fixture(k);
        let critics = TwinCritic::new(obs_dim, &hidden, &mut rng);
        let batch = random_batch(obs_dim, n, &mut rng);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for q in critics.nets() {
            let (_, grad) = critic_loss_and_grad(q, &batch, &y);
            let sizes = q.sizes();
            let fd = central_diff(q.params(), |p| {
                let net = Mlp::from_params(&sizes, p.to_vec()).unwrap();
                critic_loss_and_grad(&net, &batch, &y).0
            });
            worst = worst.max(rel_err(&grad, &fd));
        }
    }
    worst
}

pub fn actor_max_err() -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..FIXTURES {
        let (obs_dim, hidden, n, mut rng) = fixture(k);
        let mut policy = GaussianPolicy::new(obs_dim, &hidden, BOUNDS, &mut rng);
        jitter(&mut policy.net, &mut rng, 0.3);
        let critics = TwinCritic::new(obs_dim, &hidden, &mut rng);
        let obs: Vec<f64> = (0..n * obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = rng.gen_range(0.01..0.5);
        // common random numbers: one noise draw shared by every evaluation
        let noise = draw_noise(n, &mut rng);
        let analytic = actor_loss_and_grad(&policy, &critics, alpha, &obs, n, &noise).grad;
        let sizes = policy.net.sizes();
        let fd = central_diff(policy.net.params(), |p| {
            let mut pol = policy.clone();
            pol.net = Mlp::from_params(&sizes, p.to_vec()).unwrap();
            actor_loss_and_grad(&pol, &critics, alpha, &obs, n, &noise).loss
        });
        worst = worst.max(rel_err(&analytic, &fd));
    }
    worst
}

pub fn temperature_max_err() -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..FIXTURES {
        let mut rng = rng_for(k, Stream::Init, 7);
        let log_alpha = rng.gen_range(-4.0..1.0);
        let lps: Vec<f64> = (0..rng.gen_range(1..9)).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let target = -(ACTION_DIM as f64);
        let (_, g) = temperature_loss_and_grad(log_alpha, &lps, target);
        let fd = central_diff(&[log_alpha], |p| temperature_loss_and_grad(p[0], &lps, target).0);
        worst = worst.max(rel_err(&[g], &fd));
    }
    worst
}
