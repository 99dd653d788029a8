//! Tanh-squashed diagonal Gaussian.

use std::f64::consts::{LN_2, PI};

pub const LOG_SIGMA_MIN: f64 = -20.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(1 - tanh(u)^2)`, finite for any `u`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

pub fn clamp_log_sigma(raw: f64) -> f64 {
    raw.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX)
}

/// One squashed sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const N: usize> {
    pub action: [f64; N],
    /// Pre-squash value `mu + sigma * eps`.
    pub u: [f64; N],
    pub log_prob: f64,
}

/// Draws `tanh(mu + sigma * eps)` for externally supplied `eps` and returns
/// its log-density under the squashed policy.
pub fn sample_action<const N: usize>(mu: &[f64; N], log_sigma: &[f64; N], eps: &[f64; N]) -> Sample<N> {
    let mut action = [0.0; N];
    let mut u = [0.0; N];
    let mut log_prob = 0.0;
    for i in 0..N {
        u[i] = mu[i] + log_sigma[i].exp() * eps[i];
        action[i] = u[i].tanh();
        log_prob += -0.5 * eps[i] * eps[i] - log_sigma[i] - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(u[i]);
    }
    Sample { action, u, log_prob }
}

/// Log-density of the squashed policy at action `a` in `(-1, 1)`; one factor.
pub fn log_density_1d(mu: f64, log_sigma: f64, a: f64) -> f64 {
    let u = a.atanh();
    let sigma = log_sigma.exp();
    let z = (u - mu) / sigma;
    -0.5 * z * z - log_sigma - 0.5 * (2.0 * PI).ln() - log_one_minus_tanh_sq(u)
}

/// Deterministic action `tanh(mu)`.
pub fn mean_action<const N: usize>(mu: &[f64; N]) -> [f64; N] {
    mu.map(f64::tanh)
}
