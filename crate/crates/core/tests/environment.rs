use parksac::env::{make_scenario, make_scenario_with, EnvConfig, ParkingEnv, ScenarioKind, ScenarioOptions};
use parksac::nn::GaussianPolicy;
use parksac::sac::{evaluate, EvalSetup};
use parksac::seeding::{rng_for, Stream};
use parksac::sim::ControlInput;
use proptest::prelude::*;
use rand::Rng;

fn kind() -> impl Strategy<Value = ScenarioKind> {
    prop::sample::select(ScenarioKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random driving keeps every reward inside the advertised interval and
    /// the episode counter inside the step cap.
    #[test]
    fn rewards_stay_bounded(kind in kind(), seed in 0u64..1000, moving in 0usize..3, drive in any::<u64>()) {
        let opts = ScenarioOptions { moving_obstacles: moving, ..ScenarioOptions::default() };
        let spec = make_scenario_with(kind, seed, &opts).unwrap();
        let cfg = EnvConfig { max_steps: 150, ..EnvConfig::default() };
        let lower = cfg.reward_lower_bound(&spec.lot);
        let max_steer = cfg.vehicle.max_steer;
        let mut env = ParkingEnv::new(spec, cfg).unwrap();
        let obs = env.reset(seed).unwrap();
        prop_assert_eq!(obs.len(), env.obs_dim());
        let mut rng = rng_for(drive, Stream::Rollout, 0);
        loop {
            let a = ControlInput::new(rng.gen_range(-max_steer..=max_steer), rng.gen_range(-1.0..=1.0));
            let r = env.step(a).unwrap();
            prop_assert!(r.reward <= 0.0 && r.reward >= lower, "reward {} outside [{}, 0]", r.reward, lower);
            prop_assert!(r.obs.iter().all(|v| v.is_finite()));
            prop_assert!(r.info.t <= 150);
            if r.done {
                prop_assert!(r.info.collision || r.info.success || r.info.timeout);
                break;
            }
        }
    }
}

#[test]
fn random_policy_rarely_parks() {
    let cfg = EnvConfig {
        max_steps: 200,
        ..EnvConfig::default()
    };
    let policy = GaussianPolicy::new(cfg.obs_dim(), &[32, 32], [cfg.vehicle.max_steer, 1.0], &mut rng_for(9, Stream::Init, 0));
    for kind in ScenarioKind::ALL {
        let setup = EvalSetup::new(kind, cfg.clone());
        let r = evaluate(&policy, &setup, 30, 4).unwrap();
        assert!(r.success_rate <= 0.1, "{kind}: {}", r.success_rate);
        for rate in [r.success_rate, r.collision_rate] {
            assert!((0.0..=1.0).contains(&rate));
        }
        assert!(r.mean_episode_steps <= 200.0);
    }
}

#[test]
fn parallel_evaluation_matches_serial() {
    let cfg = EnvConfig {
        max_steps: 60,
        ..EnvConfig::default()
    };
    let policy = GaussianPolicy::new(cfg.obs_dim(), &[16], [cfg.vehicle.max_steer, 1.0], &mut rng_for(1, Stream::Init, 0));
    let mut setup = EvalSetup::new(ScenarioKind::Mixed, cfg);
    let serial = evaluate(&policy, &setup, 9, 2).unwrap();
    setup.jobs = 4;
    let parallel = evaluate(&policy, &setup, 9, 2).unwrap();
    assert_eq!(serial.without_timing(), parallel.without_timing());
}

#[test]
fn layouts_are_seeded() {
    for kind in ScenarioKind::ALL {
        assert_eq!(make_scenario(kind, 5).unwrap(), make_scenario(kind, 5).unwrap());
        assert_ne!(make_scenario(kind, 5).unwrap(), make_scenario(kind, 6).unwrap());
    }
}
