//! Observation layout and feature scaling.
//!
//! `[|v_0|..|v_24|, theta_0..theta_24]` over 25 pressure levels, followed by
//! 21 onboard features:
//! `h, h_dot, |v_h|, theta_h, A, V, m_total, |x|, sin(theta_x), cos(theta_x),
//! h_{t-1..t-3}, h_dot_{t-1..t-3}, a2_{t-1..t-3}, m_s, n`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const WIND_LEVELS: usize = 25;
pub const WIND_FEATURES: usize = 2 * WIND_LEVELS;
pub const AMBIENT_FEATURES: usize = 21;
pub const OBS_DIM: usize = WIND_FEATURES + AMBIENT_FEATURES;
pub const ACTION_DIM: usize = 3;

/// Pressure band sampled for the wind block [Pa].
pub const WIND_PRESSURE_MIN: f64 = 5000.0;
pub const WIND_PRESSURE_MAX: f64 = 14_000.0;

pub fn wind_pressure_levels() -> [f64; WIND_LEVELS] {
    let step = (WIND_PRESSURE_MAX - WIND_PRESSURE_MIN) / (WIND_LEVELS - 1) as f64;
    std::array::from_fn(|k| WIND_PRESSURE_MIN + step * k as f64)
}

/// Index of each ambient feature within the observation.
pub mod index {
    use super::WIND_FEATURES as W;
    pub const ALTITUDE: usize = W;
    pub const ASCENT_RATE: usize = W + 1;
    pub const LOCAL_SPEED: usize = W + 2;
    pub const LOCAL_BEARING: usize = W + 3;
    pub const AREA: usize = W + 4;
    pub const VOLUME: usize = W + 5;
    pub const TOTAL_MASS: usize = W + 6;
    pub const DISTANCE: usize = W + 7;
    pub const SIN_HEADING: usize = W + 8;
    pub const COS_HEADING: usize = W + 9;
    pub const ALTITUDE_HISTORY: usize = W + 10;
    pub const RATE_HISTORY: usize = W + 13;
    pub const FLOAT_HISTORY: usize = W + 16;
    pub const SAND: usize = W + 19;
    pub const HELIUM: usize = W + 20;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Normalization {
    /// [m]
    pub altitude: f64,
    /// Wind speeds and ascent rates [m/s].
    pub speed: f64,
    /// [m]
    pub distance: f64,
    /// [m^2]
    pub area: f64,
    /// [m^3]
    pub volume: f64,
    /// [rad]
    pub angle: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            altitude: 21_000.0,
            speed: 30.0,
            distance: 200_000.0,
            area: 10.0,
            volume: 100.0,
            angle: PI,
        }
    }
}

impl Normalization {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.altitude,
            self.speed,
            self.distance,
            self.area,
            self.volume,
            self.angle,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err("normalization constants must be positive".into())
        }
    }
}

/// Physical values behind one observation, before scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub wind_speeds: [f64; WIND_LEVELS],
    pub wind_bearings: [f64; WIND_LEVELS],
    pub altitude: f64,
    pub ascent_rate: f64,
    pub local_speed: f64,
    pub local_bearing: f64,
    pub area: f64,
    pub volume: f64,
    pub total_mass: f64,
    pub distance: f64,
    pub heading: f64,
    pub altitude_history: [f64; 3],
    pub rate_history: [f64; 3],
    pub float_history: [f64; 3],
    pub sand: f64,
    pub helium: f64,
}

/// Scaled feature vector fed to the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl RawFeatures {
    /// Scales every feature. Masses and helium are divided by their initial
    /// values, which the caller supplies.
    pub fn normalize(
        &self,
        n: &Normalization,
        initial_mass: f64,
        initial_sand: f64,
        initial_helium: f64,
    ) -> Observation {
        let mut o = [0.0; OBS_DIM];
        for k in 0..WIND_LEVELS {
            o[k] = self.wind_speeds[k] / n.speed;
            o[WIND_LEVELS + k] = self.wind_bearings[k] / n.angle;
        }
        o[index::ALTITUDE] = self.altitude / n.altitude;
        o[index::ASCENT_RATE] = self.ascent_rate / n.speed;
        o[index::LOCAL_SPEED] = self.local_speed / n.speed;
        o[index::LOCAL_BEARING] = self.local_bearing / n.angle;
        o[index::AREA] = self.area / n.area;
        o[index::VOLUME] = self.volume / n.volume;
        o[index::TOTAL_MASS] = self.total_mass / initial_mass;
        o[index::DISTANCE] = self.distance / n.distance;
        if self.distance == 0.0 {
            o[index::SIN_HEADING] = 0.0;
            o[index::COS_HEADING] = 1.0;
        } else {
            o[index::SIN_HEADING] = self.heading.sin();
            o[index::COS_HEADING] = self.heading.cos();
        }
        for k in 0..3 {
            o[index::ALTITUDE_HISTORY + k] = self.altitude_history[k] / n.altitude;
            o[index::RATE_HISTORY + k] = self.rate_history[k] / n.speed;
            o[index::FLOAT_HISTORY + k] = self.float_history[k];
        }
        o[index::SAND] = if initial_sand > 0.0 {
            self.sand / initial_sand
        } else {
            0.0
        };
        o[index::HELIUM] = self.helium / initial_helium;
        Observation(o)
    }
}
