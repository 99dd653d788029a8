use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::mlp::{flatten_grads, Layer};
use super::policy::{clamp_log_sigma, log_one_minus_tanh_sq, LOG_SIGMA_MAX, LOG_SIGMA_MIN};
use super::{Adam, Mlp, SacConfig, SacError};

/// Minibatch of transitions, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Losses {
    pub critic: f64,
    pub actor: f64,
    pub alpha_loss: f64,
    /// Temperature after the update.
    pub alpha: f64,
    /// Monte Carlo estimate of the policy entropy on the batch.
    pub entropy: f64,
}

/// Policy head evaluated on a batch.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub mu: Array2<f64>,
    pub log_sigma: Array2<f64>,
    /// False where the raw log-sigma was clamped (no gradient flows).
    pub active: Array2<bool>,
}

/// Reparameterised samples for a batch.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub actions: Array2<f64>,
    pub u: Array2<f64>,
    pub log_probs: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub config: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub actor_opt: Adam,
    pub q1_opt: Adam,
    pub q2_opt: Adam,
    pub alpha_opt: Adam,
    pub updates: u64,
}

fn split_head(out: &Array2<f64>, k: usize) -> PolicyOutput {
    let mu = out.slice(s![.., ..k]).to_owned();
    let raw = out.slice(s![.., k..2 * k]);
    PolicyOutput {
        mu,
        log_sigma: raw.mapv(clamp_log_sigma),
        active: raw.mapv(|r| (LOG_SIGMA_MIN..=LOG_SIGMA_MAX).contains(&r)),
    }
}

/// `tanh(mu + sigma * eps)` row by row with the squashed log-density.
pub fn sample_batch(head: &PolicyOutput, eps: ArrayView2<f64>) -> PolicySample {
    let u = &head.mu + &(head.log_sigma.mapv(f64::exp) * eps);
    let actions = u.mapv(f64::tanh);
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let log_probs = Array1::from_shape_fn(u.nrows(), |i| {
        (0..u.ncols())
            .map(|j| {
                let e = eps[[i, j]];
                -0.5 * e * e - head.log_sigma[[i, j]] - half_log_2pi - log_one_minus_tanh_sq(u[[i, j]])
            })
            .sum()
    });
    PolicySample { actions, u, log_probs }
}

fn critic_input(obs: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    concatenate![Axis(1), obs, actions]
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

impl Agent {
    pub fn new(config: SacConfig, obs_dim: usize, act_dim: usize, seed: u64) -> Result<Self, SacError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(2 * act_dim);
        let mut critic_sizes = vec![obs_dim + act_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, &mut rng);
        let q1 = Mlp::new(&critic_sizes, &mut rng);
        let q2 = Mlp::new(&critic_sizes, &mut rng);
        Ok(Self {
            actor_opt: Adam::new(actor.param_count(), config.lr),
            q1_opt: Adam::new(q1.param_count(), config.lr),
            q2_opt: Adam::new(q2.param_count(), config.lr),
            alpha_opt: Adam::new(1, config.lr),
            log_alpha: config.initial_alpha.ln(),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            obs_dim,
            act_dim,
            config,
            updates: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn policy(&self, obs: ArrayView2<f64>) -> Result<PolicyOutput, SacError> {
        Ok(split_head(&self.actor.forward(obs)?, self.act_dim))
    }

    fn row(&self, obs: &[f64]) -> Result<Array2<f64>, SacError> {
        Array2::from_shape_vec((1, obs.len()), obs.to_vec()).map_err(|_| SacError::ShapeMismatch {
            expected: format!("{} observation values", self.obs_dim),
            got: obs.len().to_string(),
        })
    }

    /// Stochastic action for exploration.
    pub fn act<R: Rng>(&self, obs: &[f64], rng: &mut R) -> Result<Vec<f64>, SacError> {
        let head = self.policy(self.row(obs)?.view())?;
        let eps = normal_matrix(rng, 1, self.act_dim);
        Ok(sample_batch(&head, eps.view()).actions.row(0).to_vec())
    }

    /// Deterministic action `tanh(mu)`.
    pub fn act_mean(&self, obs: &[f64]) -> Result<Vec<f64>, SacError> {
        let head = self.policy(self.row(obs)?.view())?;
        Ok(head.mu.row(0).mapv(f64::tanh).to_vec())
    }

    /// Soft Bellman targets using next-state noise `eps_next`.
    pub fn critic_targets(&self, batch: &Batch, eps_next: ArrayView2<f64>) -> Result<Array1<f64>, SacError> {
        let head = self.policy(batch.next_obs.view())?;
        let next = sample_batch(&head, eps_next);
        let x = critic_input(batch.next_obs.view(), next.actions.view());
        let q1 = self.q1_target.forward(x.view())?;
        let q2 = self.q2_target.forward(x.view())?;
        let alpha = self.alpha();
        let gamma = self.config.gamma;
        Ok(Array1::from_shape_fn(batch.len(), |i| {
            let soft = q1[[i, 0]].min(q2[[i, 0]]) - alpha * next.log_probs[i];
            let bootstrap = gamma * (1.0 - batch.dones[i]);
            if bootstrap == 0.0 {
                batch.rewards[i]
            } else {
                batch.rewards[i] + bootstrap * soft
            }
        }))
    }

    /// `0.5 * mean((Q1 - y)^2) + 0.5 * mean((Q2 - y)^2)` and gradients for
    /// both online critics.
    pub fn critic_loss(&self, batch: &Batch, targets: &Array1<f64>) -> Result<(f64, Vec<Layer>, Vec<Layer>), SacError> {
        let x = critic_input(batch.obs.view(), batch.actions.view());
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut grads = Vec::with_capacity(2);
        for q in [&self.q1, &self.q2] {
            let (out, trace) = q.forward_trace(x.view())?;
            let diff = &out.column(0) - targets;
            loss += 0.5 * diff.mapv(|d| d * d).sum() / n;
            let g = (diff / n).insert_axis(Axis(1));
            grads.push(q.backward(&trace, g.view()).0);
        }
        let g2 = grads.pop().expect("two critics");
        let g1 = grads.pop().expect("two critics");
        Ok((loss, g1, g2))
    }

    /// `mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a))` with `a` reparameterised
    /// by `eps`; returns the loss, actor gradients and per-sample log-probs.
    pub fn actor_loss(
        &self,
        obs: ArrayView2<f64>,
        eps: ArrayView2<f64>,
    ) -> Result<(f64, Vec<Layer>, Array1<f64>), SacError> {
        let k = self.act_dim;
        let n = obs.nrows() as f64;
        let (out, trace) = self.actor.forward_trace(obs)?;
        let head = split_head(&out, k);
        let sample = sample_batch(&head, eps);
        let x = critic_input(obs, sample.actions.view());
        let (v1, t1) = self.q1.forward_trace(x.view())?;
        let (v2, t2) = self.q2.forward_trace(x.view())?;
        let first = Array2::from_shape_fn(
            (obs.nrows(), 1),
            |(i, _)| if v1[[i, 0]] <= v2[[i, 0]] { 1.0 } else { 0.0 },
        );
        let second = first.mapv(|f| 1.0 - f);
        let q_min = Array1::from_shape_fn(obs.nrows(), |i| v1[[i, 0]].min(v2[[i, 0]]));
        let dq = self.q1.backward_input(&t1, first.view()) + self.q2.backward_input(&t2, second.view());
        let dq_da = dq.slice(s![.., self.obs_dim..]);

        let alpha = self.alpha();
        let loss = (alpha * &sample.log_probs - &q_min).sum() / n;
        let mut grad_out = Array2::zeros((obs.nrows(), 2 * k));
        for i in 0..obs.nrows() {
            for j in 0..k {
                let t = sample.u[[i, j]].tanh();
                let sigma_eps = head.log_sigma[[i, j]].exp() * eps[[i, j]];
                let dq_du = dq_da[[i, j]] * (1.0 - t * t);
                grad_out[[i, j]] = (alpha * 2.0 * t - dq_du) / n;
                if head.active[[i, j]] {
                    grad_out[[i, k + j]] = (alpha * (-1.0 + 2.0 * t * sigma_eps) - dq_du * sigma_eps) / n;
                }
            }
        }
        let (grads, _) = self.actor.backward(&trace, grad_out.view());
        Ok((loss, grads, sample.log_probs))
    }

    /// `mean(-alpha * (log pi + target_entropy))` and its derivative with
    /// respect to `log_alpha`.
    pub fn alpha_loss(&self, log_probs: &Array1<f64>) -> (f64, f64) {
        let mean = log_probs.mean().unwrap_or(0.0) + self.config.target_entropy;
        let loss = -self.alpha() * mean;
        (loss, loss)
    }

    /// One gradient step on both critics, the actor and the temperature,
    /// followed by the target update.
    pub fn update<R: Rng>(&mut self, batch: &Batch, rng: &mut R) -> Result<Losses, SacError> {
        let n = batch.len();
        if n == 0 {
            return Err(SacError::Config("empty batch".into()));
        }
        let eps_next = normal_matrix(rng, n, self.act_dim);
        let eps = normal_matrix(rng, n, self.act_dim);

        let targets = self.critic_targets(batch, eps_next.view())?;
        let (critic, g1, g2) = self.critic_loss(batch, &targets)?;
        if !critic.is_finite() {
            return Err(self.non_finite(
                "critic",
                format!("targets finite: {}", targets.iter().all(|t| t.is_finite())),
            ));
        }
        self.q1_opt.step(self.q1.params_mut(), flatten_grads(&g1).iter());
        self.q2_opt.step(self.q2.params_mut(), flatten_grads(&g2).iter());

        let (actor, ga, log_probs) = self.actor_loss(batch.obs.view(), eps.view())?;
        if !actor.is_finite() {
            return Err(self.non_finite("actor", format!("alpha {}", self.alpha())));
        }
        self.actor_opt.step(self.actor.params_mut(), flatten_grads(&ga).iter());

        let (alpha_loss, g_alpha) = self.alpha_loss(&log_probs);
        self.alpha_opt
            .step(std::iter::once(&mut self.log_alpha), [g_alpha].iter());
        if !self.log_alpha.is_finite() {
            return Err(self.non_finite("alpha", format!("log_alpha {}", self.log_alpha)));
        }

        let polyak = self.config.polyak;
        self.q1_target.polyak_update(&self.q1, polyak);
        self.q2_target.polyak_update(&self.q2, polyak);
        self.updates += 1;
        Ok(Losses {
            critic,
            actor,
            alpha_loss,
            alpha: self.alpha(),
            entropy: -log_probs.mean().unwrap_or(0.0),
        })
    }

    fn non_finite(&self, loss: &'static str, detail: String) -> SacError {
        SacError::NonFiniteLoss {
            loss,
            update: self.updates,
            detail,
        }
    }
}
