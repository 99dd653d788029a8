use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::wind_field::WindSample;

/// Distance-based reward: `1` inside the target radius, otherwise
/// `c * 2^(-(d - offset) / decay)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Cliff constant applied outside the target radius.
    pub c: f64,
    /// Target radius [km].
    pub radius: f64,
    /// Offset of the decay [km].
    pub rho: f64,
    /// Half-life distance of the decay [km].
    pub tau: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            c: 0.4,
            radius: 50.0,
            rho: 50.0,
            tau: 100.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(format!("reward c must lie in (0, 1], got {}", self.c));
        }
        if !(self.radius > 0.0 && self.tau > 0.0) {
            return Err("reward radius and tau must be positive".into());
        }
        if self.rho > self.radius {
            return Err("reward rho beyond the radius would exceed the inside reward".into());
        }
        Ok(())
    }

    pub fn reward(&self, distance_km: f64) -> f64 {
        if distance_km < self.radius {
            1.0
        } else {
            self.c * 2f64.powf(-(distance_km - self.rho) / self.tau)
        }
    }
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Direction from the balloon to the target, counter-clockwise from east.
/// Zero when the balloon sits on the target.
pub fn heading_to_target(x: f64, y: f64) -> f64 {
    if x == 0.0 && y == 0.0 {
        0.0
    } else {
        (-y).atan2(-x)
    }
}

/// Signed angle from the balloon-to-target direction to the wind vector,
/// positive counter-clockwise, in `(-pi, pi]`. `x`/`y` are the balloon's
/// east/north offsets from the target.
pub fn bearing_error(wind: WindSample, x: f64, y: f64) -> f64 {
    wrap_angle(wind.heading() - heading_to_target(x, y))
}

/// Fraction of an episode's strides spent inside `radius_km`. Strides that
/// never happened because the episode ended early count as outside.
pub fn tw50(distances_km: &[f64], radius_km: f64, episode_strides: usize) -> f64 {
    let total = episode_strides.max(distances_km.len());
    if total == 0 {
        return 0.0;
    }
    distances_km.iter().filter(|&&d| d < radius_km).count() as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_values() {
        let r = RewardParams::default();
        assert_eq!(r.reward(10.0), 1.0);
        assert_eq!(r.reward(49.999), 1.0);
        assert!((r.reward(50.0) - 0.4).abs() < 1e-15);
        assert!((r.reward(150.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn reward_bounds_and_monotone() {
        let r = RewardParams::default();
        let mut prev = r.reward(50.0);
        for i in 1..=1000 {
            let d = 50.0 + i as f64 * 2.0;
            let v = r.reward(d);
            assert!(v > 0.0 && v <= prev);
            prev = v;
        }
    }

    #[test]
    fn bearing_cases() {
        // Balloon due south of the target: target direction is north.
        let (x, y) = (0.0, -10_000.0);
        assert_eq!(bearing_error(WindSample { v_wx: 0.0, v_wy: 5.0 }, x, y), 0.0);
        assert!((bearing_error(WindSample { v_wx: 0.0, v_wy: -5.0 }, x, y) - PI).abs() < 1e-15);
        assert!((bearing_error(WindSample { v_wx: 1.0, v_wy: 0.0 }, x, y) + PI / 2.0).abs() < 1e-15);
        assert!((bearing_error(WindSample { v_wx: -1.0, v_wy: 0.0 }, x, y) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_distance_convention() {
        assert_eq!(heading_to_target(0.0, 0.0), 0.0);
        assert_eq!(bearing_error(WindSample { v_wx: 2.0, v_wy: 0.0 }, 0.0, 0.0), 0.0);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        for i in -100..100 {
            let w = wrap_angle(i as f64 * 0.37);
            assert!(w > -PI && w <= PI);
        }
    }

    #[test]
    fn tw50_fractions() {
        assert_eq!(tw50(&[10.0; 216], 50.0, 216), 1.0);
        assert_eq!(tw50(&[80.0; 216], 50.0, 216), 0.0);
        let mut d = vec![100.0; 216];
        d[..54].fill(3.0);
        assert_eq!(tw50(&d, 50.0, 216), 0.25);
        // Early termination: missing strides count as outside.
        assert_eq!(tw50(&[1.0; 54], 50.0, 216), 0.25);
    }
}
