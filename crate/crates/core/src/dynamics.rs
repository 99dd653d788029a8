//! Point-mass balloon dynamics.
//!
//! Vertically the balloon obeys `m * h'' = rho*V*g - 0.5*rho*c_d*A*|h'|*h' - m*g`
//! with the envelope volume from the ideal gas law at ambient temperature and
//! pressure. Horizontally the balloon moves with the wind.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::atmosphere::{Atmosphere, AtmosphereError, AtmosphereSample};
use crate::wind_field::WindSample;

/// Ascent rates beyond this magnitude indicate a broken configuration.
pub const MAX_ASCENT_RATE: f64 = 50.0;

/// Upper bound on `lambda * h` for RK4 sub-steps, where `lambda` is the
/// linearised drag relaxation rate.
const STIFFNESS_BUDGET: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Atmosphere(#[from] AtmosphereError),
    #[error("integration diverged: ascent rate {0} m/s")]
    IntegrationDiverged(f64),
    #[error("invalid time step {0} s")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConstants {
    pub drag_coefficient: f64,
    /// Molar mass of dry air [kg/mol].
    pub molar_mass_air: f64,
    /// Molar mass of helium [kg/mol].
    pub molar_mass_helium: f64,
    /// Universal gas constant [J/(mol K)].
    pub gas_constant: f64,
    pub gravity: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            drag_coefficient: 0.25,
            molar_mass_air: 0.028_964_4,
            molar_mass_helium: 0.004_002_6,
            gas_constant: 8.314_46,
            gravity: 9.806_65,
        }
    }
}

impl PhysicsConstants {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("molar_mass_air", self.molar_mass_air),
            ("molar_mass_helium", self.molar_mass_helium),
            ("gas_constant", self.gas_constant),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.1..=1.0).contains(&self.drag_coefficient) {
            return Err(format!(
                "drag_coefficient must lie in [0.1, 1.0], got {}",
                self.drag_coefficient
            ));
        }
        if self.molar_mass_helium >= self.molar_mass_air {
            return Err("helium must be lighter than air".into());
        }
        Ok(())
    }
}

/// Full kinematic and resource state. `x`/`y` are east/north displacement
/// from the station-keeping target.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BalloonState {
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub h_dot: f64,
    /// Payload plus envelope [kg].
    pub payload_mass: f64,
    /// Remaining sand ballast [kg].
    pub sand_mass: f64,
    /// Remaining helium [mol].
    pub helium_mols: f64,
    /// Elapsed episode time [s].
    pub t: f64,
}

impl BalloonState {
    pub fn helium_mass(&self, consts: &PhysicsConstants) -> f64 {
        self.helium_mols * consts.molar_mass_helium
    }

    pub fn total_mass(&self, consts: &PhysicsConstants) -> f64 {
        self.payload_mass + self.sand_mass + self.helium_mass(consts)
    }

    pub fn distance(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn volume(&self, atm: &AtmosphereSample, consts: &PhysicsConstants) -> f64 {
        envelope_volume(self.helium_mols, atm.temperature, atm.pressure, consts)
    }
}

/// Ideal-gas envelope volume with internal temperature and pressure equal to ambient.
pub fn envelope_volume(mols: f64, temperature: f64, pressure: f64, consts: &PhysicsConstants) -> f64 {
    mols * consts.gas_constant * temperature / pressure
}

/// Cross-section of the sphere with volume `volume`.
pub fn drag_area(volume: f64) -> f64 {
    PI * (3.0 * volume / (4.0 * PI)).powf(2.0 / 3.0)
}

/// Net buoyancy minus weight [N], excluding drag.
pub fn net_lift(state: &BalloonState, atm: &AtmosphereSample, consts: &PhysicsConstants) -> f64 {
    let v = state.volume(atm, consts);
    (atm.density * v - state.total_mass(consts)) * consts.gravity
}

pub fn vertical_acceleration(state: &BalloonState, atm: &AtmosphereSample, consts: &PhysicsConstants) -> f64 {
    let volume = state.volume(atm, consts);
    let area = drag_area(volume);
    let mass = state.total_mass(consts);
    let buoyancy = atm.density * volume * consts.gravity;
    let drag = 0.5 * atm.density * consts.drag_coefficient * area * state.h_dot.abs() * state.h_dot;
    (buoyancy - drag - mass * consts.gravity) / mass
}

fn acceleration_at(
    state: &BalloonState,
    h: f64,
    h_dot: f64,
    atmosphere: &Atmosphere,
    consts: &PhysicsConstants,
) -> Result<f64, DynamicsError> {
    let atm = atmosphere.sample(h)?;
    let probe = BalloonState { h, h_dot, ..*state };
    Ok(vertical_acceleration(&probe, &atm, consts))
}

/// One classical RK4 step of `(h, h_dot)` with the atmosphere re-sampled at
/// every stage. Resources are read from `state` and left untouched.
pub fn rk4_vertical_step(
    state: &BalloonState,
    dt: f64,
    atmosphere: &Atmosphere,
    consts: &PhysicsConstants,
) -> Result<(f64, f64), DynamicsError> {
    let (h, v) = (state.h, state.h_dot);
    let a1 = acceleration_at(state, h, v, atmosphere, consts)?;
    let (h2, v2) = (h + 0.5 * dt * v, v + 0.5 * dt * a1);
    let a2 = acceleration_at(state, h2, v2, atmosphere, consts)?;
    let (h3, v3) = (h + 0.5 * dt * v2, v + 0.5 * dt * a2);
    let a3 = acceleration_at(state, h3, v3, atmosphere, consts)?;
    let (h4, v4) = (h + dt * v3, v + dt * a3);
    let a4 = acceleration_at(state, h4, v4, atmosphere, consts)?;
    Ok((
        h + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4),
        v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
    ))
}

/// Linearised drag relaxation rate [1/s] around the larger of the current
/// and terminal ascent rates.
fn relaxation_rate(state: &BalloonState, atm: &AtmosphereSample, consts: &PhysicsConstants) -> f64 {
    let area = drag_area(state.volume(atm, consts));
    let k = atm.density * consts.drag_coefficient * area;
    let lift = net_lift(state, atm, consts);
    let terminal = if k > 0.0 { (2.0 * lift.abs() / k).sqrt() } else { 0.0 };
    k * state.h_dot.abs().max(terminal) / state.total_mass(consts)
}

/// Number of RK4 sub-steps needed to integrate `dt` seconds stably.
pub fn substeps_for(
    state: &BalloonState,
    dt: f64,
    atmosphere: &Atmosphere,
    consts: &PhysicsConstants,
) -> Result<usize, DynamicsError> {
    let atm = atmosphere.sample(state.h)?;
    let lambda = relaxation_rate(state, &atm, consts);
    Ok(((lambda * dt / STIFFNESS_BUDGET).ceil() as usize).max(1))
}

/// Advances the balloon by `dt` seconds: vertical motion by RK4 (sub-stepped
/// when drag makes the system stiff), horizontal motion by advection with
/// the supplied wind. Masses are unchanged.
pub fn step(
    state: &BalloonState,
    wind: WindSample,
    dt: f64,
    atmosphere: &Atmosphere,
    consts: &PhysicsConstants,
) -> Result<BalloonState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if !(state.h_dot.is_finite() && state.h.is_finite()) {
        return Err(DynamicsError::IntegrationDiverged(state.h_dot));
    }
    let substeps = substeps_for(state, dt, atmosphere, consts)?;
    let h_sub = dt / substeps as f64;
    let mut next = *state;
    for _ in 0..substeps {
        let (h, v) = rk4_vertical_step(&next, h_sub, atmosphere, consts)?;
        if !v.is_finite() || v.abs() > MAX_ASCENT_RATE {
            return Err(DynamicsError::IntegrationDiverged(v));
        }
        next.h = h;
        next.h_dot = v;
    }
    next.x += wind.v_wx * dt;
    next.y += wind.v_wy * dt;
    next.t += dt;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral_state(h: f64) -> BalloonState {
        let c = PhysicsConstants::default();
        let m = 2.0;
        BalloonState {
            x: 0.0,
            y: 0.0,
            h,
            h_dot: 0.0,
            payload_mass: 1.5,
            sand_mass: 0.5,
            helium_mols: m / (c.molar_mass_air - c.molar_mass_helium),
            t: 0.0,
        }
    }

    #[test]
    fn ideal_gas_volume() {
        let c = PhysicsConstants::default();
        assert!((envelope_volume(100.0, 250.0, 5000.0, &c) - 41.5723).abs() < 1e-9);
        assert!((envelope_volume(200.0, 216.65, 5474.9, &c) - 65.803_129).abs() < 1e-5);
        assert!(envelope_volume(1e-12, 250.0, 5000.0, &c) < 1e-9);
    }

    #[test]
    fn drag_area_of_spheres() {
        assert!((drag_area(4.0 * PI / 3.0) - PI).abs() < 1e-12);
        assert!((drag_area(32.0 * PI / 3.0) - 4.0 * PI).abs() < 1e-12);
        // r = (3V/4pi)^(1/3) evaluated independently.
        assert!((drag_area(41.5723) - 14.508_644).abs() < 1e-5);
    }

    #[test]
    fn neutral_state_has_no_acceleration() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        for h in [14_000.0, 17_000.0, 21_000.0] {
            let s = neutral_state(h);
            assert!(vertical_acceleration(&s, &atm.sample(h).unwrap(), &c).abs() < 1e-12);
        }
    }

    #[test]
    fn excess_buoyancy_accelerates_upward() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default().sample(17_000.0).unwrap();
        let mut s = neutral_state(17_000.0);
        s.sand_mass -= 0.05;
        assert!(vertical_acceleration(&s, &atm, &c) > 0.0);
    }

    #[test]
    fn drag_is_antisymmetric() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default().sample(18_000.0).unwrap();
        let mut s = neutral_state(18_000.0);
        s.sand_mass = 0.42;
        let free = {
            let m = s.total_mass(&c);
            2.0 * (atm.density * s.volume(&atm, &c) * c.gravity - m * c.gravity) / m
        };
        for v in [0.3, 1.0, 4.5] {
            let up = vertical_acceleration(&BalloonState { h_dot: v, ..s }, &atm, &c);
            let down = vertical_acceleration(&BalloonState { h_dot: -v, ..s }, &atm, &c);
            assert!((up + down - free).abs() < 1e-12);
        }
    }

    #[test]
    fn neutral_state_is_a_fixed_point() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        let s = neutral_state(17_000.0);
        let calm = WindSample::default();
        let next = step(&s, calm, 600.0, &atm, &c).unwrap();
        assert!((next.h - s.h).abs() < 1e-9 && next.h_dot.abs() < 1e-12);
        assert_eq!(next.t, 600.0);
        assert_eq!((next.x, next.y), (0.0, 0.0));
    }

    #[test]
    fn zero_net_force_preserves_rate_for_many_steps() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        let mut s = neutral_state(16_000.0);
        for _ in 0..10_000 {
            s = step(&s, WindSample::default(), 10.0, &atm, &c).unwrap();
        }
        // Only round-off in the lift balance (a few ulp of m*g) accumulates.
        assert!(s.h_dot.abs() < 1e-9 && (s.h - 16_000.0).abs() < 1e-4);
    }

    #[test]
    fn pure_advection() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        let s = neutral_state(17_000.0);
        let next = step(&s, WindSample { v_wx: 3.0, v_wy: -4.0 }, 60.0, &atm, &c).unwrap();
        assert!((next.x - 180.0).abs() < 1e-12);
        assert!((next.y + 240.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_step_and_divergence() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        let s = neutral_state(17_000.0);
        assert_eq!(
            step(&s, WindSample::default(), 0.0, &atm, &c),
            Err(DynamicsError::InvalidStep(0.0))
        );
        let mut broken = s;
        broken.h_dot = f64::NAN;
        assert!(matches!(
            step(&broken, WindSample::default(), 10.0, &atm, &c),
            Err(DynamicsError::IntegrationDiverged(_))
        ));
    }

    #[test]
    fn stiff_transients_stay_stable() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        let mut s = neutral_state(15_000.0);
        // Large lift excess: terminal ascent rate of several m/s.
        s.sand_mass = 0.0;
        let mut prev = s.h_dot;
        for _ in 0..30 {
            s = step(&s, WindSample::default(), 10.0, &atm, &c).unwrap();
            assert!(s.h_dot >= prev - 1e-9, "overshoot at {}: {} < {}", s.t, s.h_dot, prev);
            prev = s.h_dot;
        }
        assert!(s.h_dot > 3.0 && s.h_dot < 10.0);
    }

    #[test]
    fn reference_state_term_by_term() {
        // Independent evaluation: 17 km, n = 80.12 mol, m_p + m_s = 2 kg, 1 m/s up.
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default().sample(17_000.0).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(atm.pressure, 8_787.043_894_355_507) < 1e-6);
        assert!(rel(atm.density, 0.141_291_029_853_979_34) < 1e-6);
        let s = BalloonState {
            h: 17_000.0,
            h_dot: 1.0,
            payload_mass: 1.5,
            sand_mass: 0.5,
            helium_mols: 80.12,
            ..Default::default()
        };
        let volume = s.volume(&atm, &c);
        assert!(rel(volume, 16.424_451_930_163_645) < 1e-6);
        assert!(rel(drag_area(volume), 7.811_804_945_850_054) < 1e-6);
        assert!(rel(net_lift(&s, &atm, &c), 22.757_583_908_791_2 - 22.758_178_034_874_8) < 1e-3);
        assert!(rel(vertical_acceleration(&s, &atm, &c), -0.059_707_014_980_991_01) < 1e-5);
    }

    #[test]
    fn rk4_global_error_is_fourth_order() {
        let c = PhysicsConstants::default();
        let atm = Atmosphere::default();
        let mut s0 = neutral_state(16_000.0);
        s0.sand_mass -= 0.03;
        let run = |dt: f64| {
            let mut s = s0;
            for _ in 0..(400.0 / dt).round() as usize {
                let (h, v) = rk4_vertical_step(&s, dt, &atm, &c).unwrap();
                s.h = h;
                s.h_dot = v;
            }
            s.h
        };
        let reference = run(0.05);
        let e1 = (run(4.0) - reference).abs();
        let e2 = (run(2.0) - reference).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "error ratio {ratio} ({e1} / {e2})");
    }
}
