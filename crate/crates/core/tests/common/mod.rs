//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use stationkeep::sac::{flatten_grads, Agent, Batch, Mlp, SacConfig};

pub const FD_STEP: f64 = 1e-6;

/// Component-wise relative error; gradients below `floor` in magnitude are
/// compared absolutely against `floor`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences of `f` with respect to every parameter of `net`.
pub fn numeric_gradient(net: &Mlp, mut f: impl FnMut(&Mlp) -> f64) -> Vec<f64> {
    let base = net.flatten();
    let mut probe = net.clone();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + FD_STEP;
        probe.assign(&p).unwrap();
        let up = f(&probe);
        p[i] = base[i] - FD_STEP;
        probe.assign(&p).unwrap();
        let down = f(&probe);
        out.push((up - down) / (2.0 * FD_STEP));
    }
    out
}

pub struct Fixture {
    pub agent: Agent,
    pub batch: Batch,
    pub eps: Array2<f64>,
    pub eps_next: Array2<f64>,
}

/// Small agent and batch with non-trivial targets and a mid-range temperature.
pub fn fixture(seed: u64) -> Fixture {
    let config = SacConfig {
        hidden: vec![7, 6],
        gamma: 0.9,
        initial_alpha: 0.35,
        target_entropy: -1.5,
        ..Default::default()
    };
    let (obs_dim, act_dim, n) = (5, 3, 6);
    let mut agent = Agent::new(config, obs_dim, act_dim, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF1);
    // Targets that differ from the online critics exercise the full target path.
    for p in agent.q1_target.params_mut() {
        *p += 0.1 * rng.random_range(-1.0..1.0);
    }
    let mut normal = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(StandardNormal));
    let obs = normal(n, obs_dim);
    let next_obs = normal(n, obs_dim);
    let actions = normal(n, act_dim).mapv(|v: f64| v.tanh());
    let eps = normal(n, act_dim);
    let eps_next = normal(n, act_dim);
    let rewards = Array1::from_iter((0..n).map(|i| (i as f64 * 0.7).sin()));
    let dones = Array1::from_iter((0..n).map(|i| if i == 2 { 1.0 } else { 0.0 }));
    Fixture {
        agent,
        batch: Batch {
            obs,
            actions,
            rewards,
            next_obs,
            dones,
        },
        eps,
        eps_next,
    }
}

/// Worst relative error over J_Q (both critics), J_pi and J_alpha.
pub struct GradientReport {
    pub critic: f64,
    pub actor: f64,
    pub alpha: f64,
}

pub fn gradient_report(seed: u64) -> GradientReport {
    let fx = fixture(seed);
    let agent = &fx.agent;
    let floor = 1e-6;

    let targets = agent.critic_targets(&fx.batch, fx.eps_next.view()).unwrap();
    let (_, g1, g2) = agent.critic_loss(&fx.batch, &targets).unwrap();
    let n1 = numeric_gradient(&agent.q1, |q| {
        let mut a = fx.agent.clone();
        a.q1 = q.clone();
        a.critic_loss(&fx.batch, &targets).unwrap().0
    });
    let n2 = numeric_gradient(&agent.q2, |q| {
        let mut a = fx.agent.clone();
        a.q2 = q.clone();
        a.critic_loss(&fx.batch, &targets).unwrap().0
    });
    let critic =
        max_relative_error(&flatten_grads(&g1), &n1, floor).max(max_relative_error(&flatten_grads(&g2), &n2, floor));

    let (_, ga, log_probs) = agent.actor_loss(fx.batch.obs.view(), fx.eps.view()).unwrap();
    let na = numeric_gradient(&agent.actor, |net| {
        let mut a = fx.agent.clone();
        a.actor = net.clone();
        a.actor_loss(fx.batch.obs.view(), fx.eps.view()).unwrap().0
    });
    let actor = max_relative_error(&flatten_grads(&ga), &na, floor);

    let (_, g_alpha) = agent.alpha_loss(&log_probs);
    let mut probe = fx.agent.clone();
    probe.log_alpha = agent.log_alpha + FD_STEP;
    let up = probe.alpha_loss(&log_probs).0;
    probe.log_alpha = agent.log_alpha - FD_STEP;
    let down = probe.alpha_loss(&log_probs).0;
    let alpha = max_relative_error(&[g_alpha], &[(up - down) / (2.0 * FD_STEP)], floor);

    GradientReport { critic, actor, alpha }
}
