//! Altitude controller: turns the agent's `(altitude, time factor, float)`
//! command into a single vent, ballast, float or no-op per control stride.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atmosphere::AtmosphereSample;
use crate::dynamics::{BalloonState, PhysicsConstants};
use crate::resource_solver::{mols_for_ascent, sand_for_rate, SolverError};

pub const MIN_COMMAND_ALTITUDE: f64 = 14_000.0;
pub const MAX_COMMAND_ALTITUDE: f64 = 21_000.0;
pub const MIN_TIME_FACTOR: f64 = 1.0;
pub const MAX_TIME_FACTOR: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommandError {
    #[error("{field} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Agent command in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandTriple {
    /// Desired altitude [m].
    pub altitude: f64,
    /// Urgency divisor; larger values ask for a slower ascent rate.
    pub time_factor: f64,
    /// Float whenever positive.
    pub float_flag: f64,
}

impl CommandTriple {
    pub fn new(altitude: f64, time_factor: f64, float_flag: f64) -> Result<Self, CommandError> {
        let checks = [
            ("altitude", altitude, MIN_COMMAND_ALTITUDE, MAX_COMMAND_ALTITUDE),
            ("time_factor", time_factor, MIN_TIME_FACTOR, MAX_TIME_FACTOR),
            ("float_flag", float_flag, -1.0, 1.0),
        ];
        for (field, value, lo, hi) in checks {
            if !(lo..=hi).contains(&value) {
                return Err(CommandError::OutOfRange { field, value, lo, hi });
            }
        }
        Ok(Self {
            altitude,
            time_factor,
            float_flag,
        })
    }

    /// Affine map from the policy's `[-1, 1]^3` box. Inputs are clipped first.
    pub fn from_normalized(action: [f64; 3]) -> Self {
        let [u0, u1, u2] = action.map(|u| u.clamp(-1.0, 1.0));
        let mid_alt = 0.5 * (MIN_COMMAND_ALTITUDE + MAX_COMMAND_ALTITUDE);
        let half_alt = 0.5 * (MAX_COMMAND_ALTITUDE - MIN_COMMAND_ALTITUDE);
        let mid_tf = 0.5 * (MIN_TIME_FACTOR + MAX_TIME_FACTOR);
        let half_tf = 0.5 * (MAX_TIME_FACTOR - MIN_TIME_FACTOR);
        Self {
            altitude: mid_alt + half_alt * u0,
            time_factor: mid_tf + half_tf * u1,
            float_flag: u2,
        }
    }

    pub fn to_normalized(&self) -> [f64; 3] {
        let mid_alt = 0.5 * (MIN_COMMAND_ALTITUDE + MAX_COMMAND_ALTITUDE);
        let half_alt = 0.5 * (MAX_COMMAND_ALTITUDE - MIN_COMMAND_ALTITUDE);
        let mid_tf = 0.5 * (MIN_TIME_FACTOR + MAX_TIME_FACTOR);
        let half_tf = 0.5 * (MAX_TIME_FACTOR - MIN_TIME_FACTOR);
        [
            (self.altitude - mid_alt) / half_alt,
            (self.time_factor - mid_tf) / half_tf,
            self.float_flag,
        ]
    }

    pub fn wants_float(&self) -> bool {
        self.float_flag > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlThresholds {
    /// Smallest vent worth actuating [mol].
    pub n_min: f64,
    /// Smallest sand drop worth actuating [kg].
    pub m_s_min: f64,
    /// Control interval [s].
    pub stride: f64,
    /// Altitude band outside which only inward actions are honoured [m].
    pub min_altitude: f64,
    pub max_altitude: f64,
}

impl Default for ControlThresholds {
    fn default() -> Self {
        Self {
            n_min: 0.05,
            m_s_min: 0.01,
            stride: 1200.0,
            min_altitude: MIN_COMMAND_ALTITUDE,
            max_altitude: MAX_COMMAND_ALTITUDE,
        }
    }
}

impl ControlThresholds {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.n_min > 0.0 && self.m_s_min > 0.0 && self.stride > 0.0) {
            return Err("n_min, m_s_min and stride must be positive".into());
        }
        if !(self.min_altitude < self.max_altitude) {
            return Err("min_altitude must be below max_altitude".into());
        }
        Ok(())
    }
}

/// A physical action; quantities are amounts released, not targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlAction {
    Float,
    DoNothing,
    Vent { mols: f64 },
    Ballast { kg: f64 },
}

impl ControlAction {
    pub fn label(&self) -> &'static str {
        match self {
            ControlAction::Float => "float",
            ControlAction::DoNothing => "nothing",
            ControlAction::Vent { .. } => "vent",
            ControlAction::Ballast { .. } => "ballast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resource {
    Sand,
    Helium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: ControlAction,
    /// Desired ascent rate, when the command was not a float.
    pub desired_rate: Option<f64>,
    /// Set when the request could not be met with the remaining resources.
    pub exhausted: Option<Resource>,
    pub note: Option<String>,
}

impl Decision {
    fn of(action: ControlAction, desired_rate: Option<f64>) -> Self {
        Self {
            action,
            desired_rate,
            exhausted: None,
            note: None,
        }
    }
}

pub fn desired_ascent_rate(target_altitude: f64, time_factor: f64, altitude: f64, stride: f64) -> f64 {
    (target_altitude - altitude) / (time_factor * stride)
}

fn resolve_rate(
    rate: f64,
    state: &BalloonState,
    atm: &AtmosphereSample,
    thresholds: &ControlThresholds,
    consts: &PhysicsConstants,
) -> Decision {
    let mut decision = Decision::of(ControlAction::DoNothing, Some(rate));
    if rate > state.h_dot {
        let target = sand_for_rate(state, atm, consts, rate);
        let drop = state.sand_mass - target;
        if drop < thresholds.m_s_min {
            return decision;
        }
        if drop > state.sand_mass {
            log::debug!("ballast of {drop:.4} kg clamped to remaining {:.4} kg", state.sand_mass);
            decision.exhausted = Some(Resource::Sand);
            decision.note = Some(format!("ballast {drop:.6} kg clamped to {:.6} kg", state.sand_mass));
            if state.sand_mass > 0.0 {
                decision.action = ControlAction::Ballast { kg: state.sand_mass };
            }
        } else {
            decision.action = ControlAction::Ballast { kg: drop };
        }
    } else if rate < state.h_dot {
        match mols_for_ascent(state, atm, consts, rate) {
            Ok(target) => {
                let vent = state.helium_mols - target;
                if vent >= thresholds.n_min {
                    decision.action = ControlAction::Vent { mols: vent };
                    if target < thresholds.n_min {
                        decision.exhausted = Some(Resource::Helium);
                    }
                }
            }
            Err(err @ (SolverError::TargetExceedsCurrent { .. } | SolverError::NoPositiveRoot(_))) => {
                log::debug!("vent request for {rate:.3} m/s dropped: {err}");
                decision.note = Some(err.to_string());
            }
            Err(err) => decision.note = Some(err.to_string()),
        }
    }
    decision
}

/// Maps a command to a physical action for the current state.
///
/// Float wins whenever requested. Otherwise the command becomes a desired
/// ascent rate, realised by ballasting when it exceeds the current rate and
/// by venting when below it; quantities under the thresholds become no-ops.
/// Outside the altitude band only actions heading back into it are honoured.
pub fn decide(
    cmd: &CommandTriple,
    state: &BalloonState,
    atm: &AtmosphereSample,
    thresholds: &ControlThresholds,
    consts: &PhysicsConstants,
) -> Decision {
    if cmd.wants_float() {
        return Decision::of(ControlAction::Float, None);
    }
    let rate = desired_ascent_rate(cmd.altitude, cmd.time_factor, state.h, thresholds.stride);
    let mut decision = resolve_rate(rate, state, atm, thresholds, consts);
    enforce_band(&mut decision, state, thresholds);
    decision
}

/// Same as [`decide`] for a directly requested ascent rate.
pub fn decide_rate(
    rate: f64,
    state: &BalloonState,
    atm: &AtmosphereSample,
    thresholds: &ControlThresholds,
    consts: &PhysicsConstants,
) -> Decision {
    let mut decision = resolve_rate(rate, state, atm, thresholds, consts);
    enforce_band(&mut decision, state, thresholds);
    decision
}

fn enforce_band(decision: &mut Decision, state: &BalloonState, thresholds: &ControlThresholds) {
    let resulting_rate = match decision.action {
        ControlAction::Float => return,
        ControlAction::DoNothing => state.h_dot,
        ControlAction::Vent { .. } | ControlAction::Ballast { .. } => decision.desired_rate.unwrap_or(state.h_dot),
    };
    let inward = if state.h > thresholds.max_altitude {
        resulting_rate < 0.0
    } else if state.h < thresholds.min_altitude {
        resulting_rate > 0.0
    } else {
        true
    };
    if !inward {
        decision.action = ControlAction::Float;
        decision.exhausted = None;
        decision.note = Some(format!("outside altitude band at {:.0} m, floating", state.h));
    }
}
