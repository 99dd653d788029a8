use ndarray::{Array1, Array2};
use rand::Rng;

use super::Batch;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<'a> {
    pub obs: &'a [f64],
    /// Policy-space action in `[-1, 1]`.
    pub action: &'a [f64],
    pub reward: f64,
    pub next_obs: &'a [f64],
    /// Genuine termination; time-outs keep bootstrapping.
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    len: usize,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0);
        Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            len: 0,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) {
        assert_eq!(t.obs.len(), self.obs_dim);
        assert_eq!(t.next_obs.len(), self.obs_dim);
        assert_eq!(t.action.len(), self.act_dim);
        let done = if t.done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.obs.extend_from_slice(t.obs);
            self.actions.extend_from_slice(t.action);
            self.next_obs.extend_from_slice(t.next_obs);
            self.rewards.push(t.reward);
            self.dones.push(done);
            self.len += 1;
        } else {
            let i = self.head;
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(t.obs);
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(t.next_obs);
            self.actions[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(t.action);
            self.rewards[i] = t.reward;
            self.dones[i] = done;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn sample_indices<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(self.len > 0, "sampling from an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.len)).collect()
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        let n = indices.len();
        let mut obs = Array2::zeros((n, self.obs_dim));
        let mut next_obs = Array2::zeros((n, self.obs_dim));
        let mut actions = Array2::zeros((n, self.act_dim));
        let mut rewards = Array1::zeros(n);
        let mut dones = Array1::zeros(n);
        for (row, &i) in indices.iter().enumerate() {
            let o = i * self.obs_dim..(i + 1) * self.obs_dim;
            let a = i * self.act_dim..(i + 1) * self.act_dim;
            for (dst, src) in obs.row_mut(row).iter_mut().zip(&self.obs[o.clone()]) {
                *dst = *src;
            }
            for (dst, src) in next_obs.row_mut(row).iter_mut().zip(&self.next_obs[o]) {
                *dst = *src;
            }
            for (dst, src) in actions.row_mut(row).iter_mut().zip(&self.actions[a]) {
                *dst = *src;
            }
            rewards[row] = self.rewards[i];
            dones[row] = self.dones[i];
        }
        Batch {
            obs,
            actions,
            rewards,
            next_obs,
            dones,
        }
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Batch {
        self.gather(&self.sample_indices(n, rng))
    }
}
