//! Steady-state inversions of the vertical force balance.
//!
//! With `h'' = 0` the balance `rho*V*g - 0.5*rho*c_d*A*|v|*v - m*g = 0` can be
//! solved for the helium content (venting), the sand mass (ballasting) or,
//! with `v = 0`, for neutral buoyancy (floating).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::atmosphere::AtmosphereSample;
use crate::dynamics::{drag_area, BalloonState, PhysicsConstants};

/// Relative bracket width at which bisection stops.
const BISECTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no positive helium content reaches {0} m/s")]
    NoPositiveRoot(f64),
    #[error("target helium {target} mol exceeds current {current} mol")]
    TargetExceedsCurrent { target: f64, current: f64 },
    #[error("target sand {0} kg is negative")]
    NegativeTarget(f64),
    #[error("floating needs {required} kg of sand, only {available} kg left")]
    InsufficientSand { required: f64, available: f64 },
    #[error("floating needs venting {required} mol, only {available} mol left")]
    InsufficientHelium { required: f64, available: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceTargets {
    /// Helium to keep after venting [mol].
    pub n_calc: Option<f64>,
    /// Sand to keep after ballasting [kg].
    pub m_s_calc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FloatAdjustment {
    VentTo(f64),
    BallastTo(f64),
}

impl FloatAdjustment {
    /// Applies the adjustment, checking it against the available resources.
    pub fn apply(self, state: &BalloonState) -> Result<BalloonState, SolverError> {
        match self {
            FloatAdjustment::VentTo(n) => {
                if n > state.helium_mols {
                    return Err(SolverError::InsufficientHelium {
                        required: n - state.helium_mols,
                        available: state.helium_mols,
                    });
                }
                Ok(BalloonState {
                    helium_mols: n,
                    ..*state
                })
            }
            FloatAdjustment::BallastTo(m) => {
                if m < 0.0 {
                    return Err(SolverError::InsufficientSand {
                        required: state.sand_mass - m,
                        available: state.sand_mass,
                    });
                }
                Ok(BalloonState { sand_mass: m, ..*state })
            }
        }
    }
}

/// Signed quadratic drag factor `0.5*rho*c_d*|v|*v`, the per-unit-area drag.
fn drag_pressure(atm: &AtmosphereSample, consts: &PhysicsConstants, rate: f64) -> f64 {
    0.5 * atm.density * consts.drag_coefficient * rate.abs() * rate
}

/// Helium content whose settled ascent rate at the current altitude is
/// `rate`, with sand and payload as in `state`.
///
/// Substituting `u = n^(1/3)` gives `a*u^3 - b*u^2 - W = 0` with
/// `a = g*(rho*R*T/P - M_h)`, `b = 0.5*rho*|v|*v*c_d*pi*(3RT/(4 pi P))^(2/3)`
/// and `W = (m_p + m_s)*g`. For `a > 0, W > 0` exactly one positive root
/// exists whatever the sign of `b`; it is bracketed and bisected.
pub fn helium_for_rate(
    state: &BalloonState,
    atm: &AtmosphereSample,
    consts: &PhysicsConstants,
    rate: f64,
) -> Result<f64, SolverError> {
    if !rate.is_finite() {
        return Err(SolverError::NoPositiveRoot(rate));
    }
    let g = consts.gravity;
    let molar_volume = consts.gas_constant * atm.temperature / atm.pressure;
    let a = g * (atm.density * molar_volume - consts.molar_mass_helium);
    let b = drag_pressure(atm, consts, rate) * PI * (3.0 * molar_volume / (4.0 * PI)).powf(2.0 / 3.0);
    let w = (state.payload_mass + state.sand_mass) * g;
    if !(a > 0.0 && w > 0.0) {
        return Err(SolverError::NoPositiveRoot(rate));
    }
    let f = |u: f64| (a * u - b) * u * u - w;

    let cube_root_w = (w / a).cbrt();
    let mut hi = if b > 0.0 { b / a + cube_root_w } else { cube_root_w };
    while f(hi) < 0.0 {
        hi *= 1.0 + 1e-9;
    }
    let mut lo = 0.0;
    // Bisection on n = u^3 converges when the bracket on u is relatively tight.
    while hi - lo > BISECTION_TOLERANCE / 3.0 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = 0.5 * (lo + hi);
    let n = u * u * u;
    if !(n > 0.0 && n.is_finite()) {
        return Err(SolverError::NoPositiveRoot(rate));
    }
    Ok(n)
}

/// Target helium after venting to reach `rate`. Errors when reaching it
/// would require adding helium.
pub fn mols_for_ascent(
    state: &BalloonState,
    atm: &AtmosphereSample,
    consts: &PhysicsConstants,
    rate: f64,
) -> Result<f64, SolverError> {
    let n = helium_for_rate(state, atm, consts, rate)?;
    if n > state.helium_mols {
        return Err(SolverError::TargetExceedsCurrent {
            target: n,
            current: state.helium_mols,
        });
    }
    Ok(n)
}

/// Sand mass whose settled ascent rate at the current altitude is `rate`,
/// with the present helium content:
/// `m_s = rho*V - rho/(2g)*c_d*A*|v|*v - m_p - m_h`.
pub fn sand_for_rate(state: &BalloonState, atm: &AtmosphereSample, consts: &PhysicsConstants, rate: f64) -> f64 {
    let volume = state.volume(atm, consts);
    let area = drag_area(volume);
    atm.density * volume
        - drag_pressure(atm, consts, rate) * area / consts.gravity
        - state.payload_mass
        - state.helium_mass(consts)
}

/// Target sand after ballasting to reach `rate`.
pub fn sand_for_ascent(
    state: &BalloonState,
    atm: &AtmosphereSample,
    consts: &PhysicsConstants,
    rate: f64,
) -> Result<f64, SolverError> {
    let m = sand_for_rate(state, atm, consts, rate);
    if m < 0.0 {
        return Err(SolverError::NegativeTarget(m));
    }
    Ok(m)
}

/// Trim to neutral buoyancy: vent when buoyancy exceeds weight, otherwise drop sand.
pub fn float_adjustment(
    state: &BalloonState,
    atm: &AtmosphereSample,
    consts: &PhysicsConstants,
) -> Result<FloatAdjustment, SolverError> {
    let buoyant_mass = atm.density * state.volume(atm, consts);
    let adjustment = if buoyant_mass > state.total_mass(consts) {
        let per_mol = atm.density * consts.gas_constant * atm.temperature / atm.pressure - consts.molar_mass_helium;
        // Round-off can put the target a few ulp above the current content.
        FloatAdjustment::VentTo(((state.sand_mass + state.payload_mass) / per_mol).min(state.helium_mols))
    } else {
        FloatAdjustment::BallastTo((buoyant_mass - state.payload_mass - state.helium_mass(consts)).min(state.sand_mass))
    };
    adjustment.apply(state)?;
    Ok(adjustment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atmosphere::Atmosphere;
    use crate::dynamics::{step, vertical_acceleration};
    use crate::wind_field::WindSample;
    use proptest::prelude::*;

    fn consts() -> PhysicsConstants {
        PhysicsConstants::default()
    }

    fn equilibrium(h: f64) -> (BalloonState, AtmosphereSample) {
        let c = consts();
        let s = BalloonState {
            x: 0.0,
            y: 0.0,
            h,
            h_dot: 0.0,
            payload_mass: 1.5,
            sand_mass: 0.5,
            helium_mols: 2.0 / (c.molar_mass_air - c.molar_mass_helium),
            t: 0.0,
        };
        (s, Atmosphere::default().sample(h).unwrap())
    }

    /// Ascent rate after the transient has decayed, measured by simulation.
    fn simulated_rate(state: &BalloonState) -> f64 {
        let c = consts();
        let atm = Atmosphere::default();
        let mut s = *state;
        for _ in 0..18 {
            s = step(&s, WindSample::default(), 10.0, &atm, &c).unwrap();
        }
        s.h_dot
    }

    #[test]
    fn zero_rate_collapses_to_molar_mass_difference() {
        let c = consts();
        for h in [14_500.0, 18_000.0, 20_500.0] {
            let (mut s, atm) = equilibrium(h);
            s.sand_mass = 0.37;
            let n = helium_for_rate(&s, &atm, &c, 0.0).unwrap();
            let expected = (s.payload_mass + s.sand_mass) / (c.molar_mass_air - c.molar_mass_helium);
            assert!(((n - expected) / expected).abs() < 1e-12, "{n} vs {expected}");
        }
    }

    #[test]
    fn current_rate_is_a_fixed_point() {
        let c = consts();
        let (mut s, atm) = equilibrium(17_000.0);
        s.sand_mass = 0.45;
        // Settled rate from the algebraic balance.
        let lift = crate::dynamics::net_lift(&s, &atm, &c);
        let area = drag_area(s.volume(&atm, &c));
        let rate = (2.0 * lift / (atm.density * c.drag_coefficient * area)).sqrt();
        let n = mols_for_ascent(&s, &atm, &c, rate).unwrap();
        assert!(((n - s.helium_mols) / s.helium_mols).abs() < 1e-10);
        let m = sand_for_ascent(&s, &atm, &c, rate).unwrap();
        assert!((m - s.sand_mass).abs() < 1e-12);
    }

    #[test]
    fn vent_then_settle_at_requested_descent() {
        let c = consts();
        let (s, atm) = equilibrium(18_000.0);
        let n = mols_for_ascent(&s, &atm, &c, -1.5).unwrap();
        let vented = BalloonState { helium_mols: n, ..s };
        let settled = simulated_rate(&vented);
        assert!((settled + 1.5).abs() < 0.05, "settled {settled}");
    }

    #[test]
    fn ballast_then_settle_at_requested_ascent() {
        let c = consts();
        let (s, atm) = equilibrium(15_000.0);
        let m = sand_for_ascent(&s, &atm, &c, 2.0).unwrap();
        let dropped = BalloonState { sand_mass: m, ..s };
        let settled = simulated_rate(&dropped);
        assert!((settled - 2.0).abs() < 0.05, "settled {settled}");
    }

    #[test]
    fn vent_cannot_add_helium() {
        let c = consts();
        let (s, atm) = equilibrium(17_000.0);
        assert!(matches!(
            mols_for_ascent(&s, &atm, &c, 1.0),
            Err(SolverError::TargetExceedsCurrent { .. })
        ));
    }

    #[test]
    fn unreachable_ascent_gives_negative_sand() {
        let c = consts();
        let (s, atm) = equilibrium(17_000.0);
        assert!(matches!(
            sand_for_ascent(&s, &atm, &c, 20.0),
            Err(SolverError::NegativeTarget(_))
        ));
    }

    #[test]
    fn zero_rate_sand_is_drag_free_balance() {
        let c = consts();
        let (s, atm) = equilibrium(19_000.0);
        let expected = atm.density * s.volume(&atm, &c) - s.payload_mass - s.helium_mass(&c);
        assert_eq!(sand_for_ascent(&s, &atm, &c, 0.0).unwrap(), expected);
    }

    #[test]
    fn float_neutral_state_needs_nothing() {
        let c = consts();
        let (s, atm) = equilibrium(17_000.0);
        match float_adjustment(&s, &atm, &c).unwrap() {
            FloatAdjustment::VentTo(n) => assert!((n - s.helium_mols).abs() < 1e-9),
            FloatAdjustment::BallastTo(m) => assert!((m - s.sand_mass).abs() < 1e-9),
        }
    }

    #[test]
    fn float_near_neutral_never_fails() {
        let c = consts();
        for h in [14_500.0, 15_147.0, 16_720.0, 19_299.0, 20_900.0] {
            let (mut s, atm) = equilibrium(h);
            for k in 0..200 {
                s.helium_mols *= 1.0 + (k as f64 - 100.0) * 1e-16;
                assert!(float_adjustment(&s, &atm, &c).is_ok(), "h {h} k {k}");
            }
        }
    }

    #[test]
    fn float_buoyant_case_vents() {
        let c = consts();
        let (mut s, atm) = equilibrium(17_000.0);
        s.helium_mols = 90.0;
        let adj = float_adjustment(&s, &atm, &c).unwrap();
        let FloatAdjustment::VentTo(n) = adj else {
            panic!("expected vent, got {adj:?}")
        };
        assert!((n - 80.122_427).abs() < 1e-5);
        let trimmed = adj.apply(&s).unwrap();
        assert!(vertical_acceleration(&trimmed, &atm, &c).abs() < 1e-9);
    }

    #[test]
    fn float_heavy_case_ballasts_and_holds() {
        let c = consts();
        let (mut s, atm) = equilibrium(17_000.0);
        s.helium_mols = 75.0;
        let adj = float_adjustment(&s, &atm, &c).unwrap();
        let FloatAdjustment::BallastTo(m) = adj else {
            panic!("expected ballast")
        };
        assert!((m - (atm.density * s.volume(&atm, &c) - s.payload_mass - s.helium_mass(&c))).abs() < 1e-15);
        let mut trimmed = adj.apply(&s).unwrap();
        let atmosphere = Atmosphere::default();
        for _ in 0..360 {
            trimmed = step(&trimmed, WindSample::default(), 10.0, &atmosphere, &c).unwrap();
            assert!(trimmed.h_dot.abs() < 0.01);
        }
    }

    #[test]
    fn float_reports_insufficient_sand() {
        let c = consts();
        let (mut s, atm) = equilibrium(17_000.0);
        s.helium_mols = 40.0;
        assert!(matches!(
            float_adjustment(&s, &atm, &c),
            Err(SolverError::InsufficientSand { .. })
        ));
    }

    proptest! {
        #[test]
        fn cubic_has_single_positive_root(
            a in 1e-3f64..10.0, b in -50.0f64..50.0, w in 1e-3f64..100.0,
        ) {
            // Sign changes of a*u^3 - b*u^2 - W on a fine grid over the bracket.
            let f = |u: f64| (a * u - b) * u * u - w;
            let hi = b.max(0.0) / a + (w / a).cbrt();
            let mut changes = 0;
            let mut prev = f(1e-9);
            for i in 1..=20_000 {
                let cur = f(hi * 1.5 * i as f64 / 20_000.0);
                if (cur > 0.0) != (prev > 0.0) { changes += 1; }
                prev = cur;
            }
            prop_assert_eq!(changes, 1);
            prop_assert!(f(hi) >= 0.0);
        }

        #[test]
        fn helium_target_is_monotone_in_rate(
            h in 14_000.0f64..21_000.0, r1 in -6.0f64..6.0, dr in 0.0f64..3.0,
        ) {
            let c = consts();
            let (s, atm) = {
                let (s, _) = equilibrium(h);
                (s, Atmosphere::default().sample(h).unwrap())
            };
            let n1 = helium_for_rate(&s, &atm, &c, r1).unwrap();
            let n2 = helium_for_rate(&s, &atm, &c, r1 + dr).unwrap();
            prop_assert!(n2 >= n1 * (1.0 - 1e-12));
            let m1 = sand_for_rate(&s, &atm, &c, r1);
            let m2 = sand_for_rate(&s, &atm, &c, r1 + dr);
            prop_assert!(m2 <= m1 + 1e-15);
        }

        #[test]
        fn float_zeroes_acceleration(
            h in 14_000.0f64..21_000.0, n in 70.0f64..95.0, sand in 0.3f64..0.8,
        ) {
            let c = consts();
            let atm = Atmosphere::default().sample(h).unwrap();
            let s = BalloonState { h, helium_mols: n, sand_mass: sand, ..equilibrium(h).0 };
            if let Ok(adj) = float_adjustment(&s, &atm, &c) {
                let trimmed = adj.apply(&s).unwrap();
                prop_assert!(vertical_acceleration(&trimmed, &atm, &c).abs() < 1e-9);
                let ratio = atm.density * trimmed.volume(&atm, &c) / trimmed.total_mass(&c);
                prop_assert!((ratio - 1.0).abs() < 1e-9);
            }
        }
    }
}
