use rand::Rng;

use crate::nn::ACTION_DIM;
use crate::sim::ControlInput;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: ControlInput,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Terminal in the MDP sense (collision or success). Step-cap timeouts
    /// are stored as non-terminal.
    pub done: bool,
}

/// Minibatch in row-major layout. Actions are divided by their bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs_dim: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition], bounds: [f64; ACTION_DIM]) -> Self {
        let obs_dim = ts.first().map_or(0, |t| t.s.len());
        let mut b = Batch {
            size: ts.len(),
            obs_dim,
            obs: Vec::with_capacity(ts.len() * obs_dim),
            actions: Vec::with_capacity(ts.len() * ACTION_DIM),
            rewards: Vec::with_capacity(ts.len()),
            next_obs: Vec::with_capacity(ts.len() * obs_dim),
            dones: Vec::with_capacity(ts.len()),
        };
        for t in ts {
            b.obs.extend_from_slice(&t.s);
            b.actions.push(t.a.steer / bounds[0]);
            b.actions.push(t.a.throttle / bounds[1]);
            b.rewards.push(t.r);
            b.next_obs.extend_from_slice(&t.s_next);
            b.dones.push(if t.done { 1.0 } else { 0.0 });
        }
        b
    }
}

/// Ring buffer of transitions stored column-wise. Storage grows on demand up
/// to `capacity`, then the oldest entries are overwritten.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    bounds: [f64; ACTION_DIM],
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    /// Total pushes since creation; the next write goes to `pushes % capacity`.
    pushes: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, bounds: [f64; ACTION_DIM]) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            capacity,
            obs_dim,
            bounds,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            pushes: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn push(&mut self, t: &Transition) {
        assert_eq!(t.s.len(), self.obs_dim, "transition observation length");
        assert_eq!(t.s_next.len(), self.obs_dim, "transition next-observation length");
        let unit = [t.a.steer / self.bounds[0], t.a.throttle / self.bounds[1]];
        let done = if t.done { 1.0 } else { 0.0 };
        if self.len() < self.capacity {
            self.obs.extend_from_slice(&t.s);
            self.next_obs.extend_from_slice(&t.s_next);
            self.actions.extend_from_slice(&unit);
            self.rewards.push(t.r);
            self.dones.push(done);
        } else {
            let i = (self.pushes % self.capacity as u64) as usize;
            let d = self.obs_dim;
            self.obs[i * d..(i + 1) * d].copy_from_slice(&t.s);
            self.next_obs[i * d..(i + 1) * d].copy_from_slice(&t.s_next);
            self.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM].copy_from_slice(&unit);
            self.rewards[i] = t.r;
            self.dones[i] = done;
        }
        self.pushes += 1;
    }

    /// Stored transition at a storage slot (not insertion order).
    pub fn get(&self, i: usize) -> Transition {
        let d = self.obs_dim;
        Transition {
            s: self.obs[i * d..(i + 1) * d].to_vec(),
            a: ControlInput::new(self.actions[2 * i] * self.bounds[0], self.actions[2 * i + 1] * self.bounds[1]),
            r: self.rewards[i],
            s_next: self.next_obs[i * d..(i + 1) * d].to_vec(),
            done: self.dones[i] != 0.0,
        }
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.is_empty(), "sampling from an empty replay buffer");
        (0..n).map(|_| rng.gen_range(0..self.len())).collect()
    }

    /// Uniform minibatch, with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        let idx = self.sample_indices(n, rng);
        self.gather(&idx)
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let d = self.obs_dim;
        let mut b = Batch {
            size: idx.len(),
            obs_dim: d,
            obs: Vec::with_capacity(idx.len() * d),
            actions: Vec::with_capacity(idx.len() * ACTION_DIM),
            rewards: Vec::with_capacity(idx.len()),
            next_obs: Vec::with_capacity(idx.len() * d),
            dones: Vec::with_capacity(idx.len()),
        };
        for &i in idx {
            b.obs.extend_from_slice(&self.obs[i * d..(i + 1) * d]);
            b.actions.extend_from_slice(&self.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
            b.rewards.push(self.rewards[i]);
            b.next_obs.extend_from_slice(&self.next_obs[i * d..(i + 1) * d]);
            b.dones.push(self.dones[i]);
        }
        b
    }

    /// Raw column storage, in slot order: `(obs, actions, rewards, next_obs, dones)`.
    pub fn columns(&self) -> (&[f64], &[f64], &[f64], &[f64], &[f64]) {
        (&self.obs, &self.actions, &self.rewards, &self.next_obs, &self.dones)
    }

    /// Rebuild from raw columns, as written by [`ReplayBuffer::columns`].
    #[allow(clippy::too_many_arguments)]
    pub fn from_columns(
        capacity: usize,
        obs_dim: usize,
        bounds: [f64; ACTION_DIM],
        pushes: u64,
        obs: Vec<f64>,
        actions: Vec<f64>,
        rewards: Vec<f64>,
        next_obs: Vec<f64>,
        dones: Vec<f64>,
    ) -> Result<Self, String> {
        let n = rewards.len();
        if n > capacity
            || obs.len() != n * obs_dim
            || next_obs.len() != n * obs_dim
            || actions.len() != n * ACTION_DIM
            || dones.len() != n
            || (pushes as usize) < n
            || (n < capacity && pushes as usize != n)
        {
            return Err("inconsistent replay buffer columns".into());
        }
        Ok(Self {
            capacity,
            obs_dim,
            bounds,
            obs,
            actions,
            rewards,
            next_obs,
            dones,
            pushes,
        })
    }
}
