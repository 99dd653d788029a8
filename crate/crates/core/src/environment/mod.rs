//! Episodic station-keeping task.
//!
//! One [`Environment::step`] is one control stride: the controller resolves
//! the command into a physical action, resources change instantly, and the
//! balloon is then integrated through the stride on fixed inner steps with
//! noise-augmented winds. The reward is evaluated at the end of the stride.

mod observation;
mod reward;

pub use observation::{
    index, wind_pressure_levels, Normalization, Observation, RawFeatures, ACTION_DIM, AMBIENT_FEATURES, OBS_DIM,
    WIND_FEATURES, WIND_LEVELS,
};
pub use reward::{bearing_error, heading_to_target, tw50, wrap_angle, RewardParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::atmosphere::Atmosphere;
use crate::controller::{self, CommandTriple, ControlAction, ControlThresholds, Decision, Resource};
use crate::dynamics::{self, drag_area, BalloonState, DynamicsError, PhysicsConstants};
use crate::resource_solver::{float_adjustment, SolverError};
use crate::wind_field::{NoiseConfig, WindGrid, WindNoise, WindSample};

/// Meters per degree of latitude on the local tangent plane.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("step called before reset")]
    NotReset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Episode length [s].
    pub duration: f64,
    /// Physics step inside a stride [s].
    pub inner_step: f64,
    pub target_lon: f64,
    pub target_lat: f64,
    /// Initial longitude/latitude offsets are uniform in `+-init_offset` [deg].
    pub init_offset: f64,
    /// Initial altitude range [m].
    pub init_altitude: [f64; 2],
    /// Episode start time range within the wind grid [s].
    pub start_time: [f64; 2],
    /// Payload plus envelope [kg].
    pub payload_mass: f64,
    /// Initial sand [kg].
    pub sand_mass: f64,
    /// Initial helium [mol]; `None` sizes it for neutral buoyancy.
    pub helium_mols: Option<f64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            duration: 259_200.0,
            inner_step: 10.0,
            target_lon: -113.0,
            target_lat: 1.0,
            init_offset: 0.3,
            init_altitude: [15_000.0, 20_000.0],
            start_time: [0.0, 86_400.0],
            payload_mass: 1.5,
            sand_mass: 0.5,
            helium_mols: None,
        }
    }
}

/// Everything the environment needs besides the wind grids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub episode: EpisodeConfig,
    pub reward: RewardParams,
    pub thresholds: ControlThresholds,
    pub physics: PhysicsConstants,
    pub noise: NoiseConfig,
    pub normalization: Normalization,
}

impl EnvConfig {
    pub fn strides_per_episode(&self) -> usize {
        (self.episode.duration / self.thresholds.stride).round() as usize
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let err = |m: String| EnvError::Config(m);
        self.reward.validate().map_err(err)?;
        self.thresholds.validate().map_err(err)?;
        self.physics.validate().map_err(err)?;
        self.noise.validate().map_err(err)?;
        self.normalization.validate().map_err(err)?;
        let e = &self.episode;
        let strides = e.duration / self.thresholds.stride;
        if !(e.duration > 0.0) || (strides - strides.round()).abs() > 1e-9 {
            return Err(err(format!(
                "duration {} s is not a positive multiple of the {} s stride",
                e.duration, self.thresholds.stride
            )));
        }
        let inner = self.thresholds.stride / e.inner_step;
        if !(e.inner_step > 0.0) || (inner - inner.round()).abs() > 1e-9 {
            return Err(err("inner_step must divide the stride".into()));
        }
        if !(e.payload_mass > 0.0 && e.sand_mass >= 0.0) {
            return Err(err("payload mass must be positive and sand non-negative".into()));
        }
        if let Some(n) = e.helium_mols {
            if !(n > 0.0) {
                return Err(err("helium_mols must be positive".into()));
            }
        }
        if !(e.init_offset >= 0.0) {
            return Err(err("init_offset must be >= 0".into()));
        }
        let [lo, hi] = e.init_altitude;
        if !(lo <= hi && lo >= 0.0 && hi <= crate::atmosphere::MAX_ALTITUDE) {
            return Err(err(format!("bad init_altitude range [{lo}, {hi}]")));
        }
        if !(e.start_time[0] <= e.start_time[1] && e.start_time[0] >= 0.0) {
            return Err(err("bad start_time range".into()));
        }
        Ok(())
    }

    /// Checks that initial positions and the episode time window fit in every grid.
    pub fn check_grids(&self, grids: &[WindGrid]) -> Result<(), EnvError> {
        if grids.is_empty() {
            return Err(EnvError::Config("no wind grids configured".into()));
        }
        let e = &self.episode;
        for (g, grid) in grids.iter().enumerate() {
            for (dlon, dlat) in [(-1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (1.0, -1.0)] {
                let lon = e.target_lon + dlon * e.init_offset;
                let lat = e.target_lat + dlat * e.init_offset;
                if !grid.contains(lon, lat) {
                    return Err(EnvError::Config(format!(
                        "initial position ({lon}, {lat}) outside wind grid {g}"
                    )));
                }
            }
            let time = grid.time_axis();
            let last = time[time.len() - 1];
            if e.start_time[0] < time[0] || e.start_time[1] + e.duration > last {
                return Err(EnvError::Config(format!(
                    "episode window [{}, {}] s exceeds wind grid {g} time span [{}, {last}] s",
                    e.start_time[0],
                    e.start_time[1] + e.duration,
                    time[0]
                )));
            }
        }
        Ok(())
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    /// The full duration elapsed.
    Time,
    /// Sand (or helium) ran out while an action needed it.
    Resources,
    /// The balloon left the modelled atmosphere or the integrator diverged.
    Physics,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Time => "time",
            Termination::Resources => "resources",
            Termination::Physics => "physics",
        }
    }
}

/// Input for one stride. Agents use [`StepCommand::Command`]; scripted
/// flights may bypass the agent interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepCommand {
    Command(CommandTriple),
    /// Request a settled ascent rate directly [m/s].
    Rate(f64),
    Vent(f64),
    Ballast(f64),
    Float,
    Hold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub action: ControlAction,
    pub desired_rate: Option<f64>,
    pub vented_mols: f64,
    pub dropped_kg: f64,
    pub distance_km: f64,
    pub tw50_so_far: f64,
    pub strides: usize,
    pub termination: Option<Termination>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

/// One row of the per-stride trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub stride: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub h_dot: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub action: &'static str,
    pub vented_mol: f64,
    pub dropped_kg: f64,
    pub reward: f64,
    pub distance_km: f64,
}

/// State sampled after every inner physics step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub h_dot: f64,
}

struct Episode {
    grid: usize,
    start_time: f64,
    noise: WindNoise,
    state: BalloonState,
    initial: BalloonState,
    altitude_history: [f64; 3],
    rate_history: [f64; 3],
    float_history: [f64; 3],
    distances_km: Vec<f64>,
    cumulative_reward: f64,
    vented_mols: f64,
    dropped_kg: f64,
    termination: Option<Termination>,
}

/// Aggregate bookkeeping for a finished (or running) episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub strides: usize,
    pub cumulative_reward: f64,
    pub tw50: f64,
    pub termination: Option<Termination>,
    pub sand_used_kg: f64,
    pub helium_used_mol: f64,
    pub initial: BalloonState,
    pub state: BalloonState,
}

pub struct Environment {
    config: EnvConfig,
    grids: Arc<Vec<WindGrid>>,
    atmosphere: Atmosphere,
    episode: Option<Episode>,
    record_trace: bool,
    trace: Vec<TracePoint>,
}

impl Environment {
    pub fn new(config: EnvConfig, grids: Arc<Vec<WindGrid>>) -> Result<Self, EnvError> {
        config.validate()?;
        config.check_grids(&grids)?;
        let atmosphere = Atmosphere::standard(&config.physics);
        Ok(Self {
            config,
            grids,
            atmosphere,
            episode: None,
            record_trace: false,
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn atmosphere(&self) -> &Atmosphere {
        &self.atmosphere
    }

    /// Keep every inner physics step of the current episode.
    pub fn set_trace(&mut self, on: bool) {
        self.record_trace = on;
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    pub fn state(&self) -> Option<&BalloonState> {
        self.episode.as_ref().map(|e| &e.state)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().is_some_and(|e| e.termination.is_some())
    }

    pub fn summary(&self) -> Option<EpisodeSummary> {
        let e = self.episode.as_ref()?;
        Some(EpisodeSummary {
            strides: e.distances_km.len(),
            cumulative_reward: e.cumulative_reward,
            tw50: tw50(
                &e.distances_km,
                self.config.reward.radius,
                self.config.strides_per_episode(),
            ),
            termination: e.termination,
            sand_used_kg: e.dropped_kg,
            helium_used_mol: e.vented_mols,
            initial: e.initial,
            state: e.state,
        })
    }

    fn xy_to_lon_lat(&self, x: f64, y: f64) -> (f64, f64) {
        let e = &self.config.episode;
        let lat = e.target_lat + y / METERS_PER_DEGREE;
        let lon = e.target_lon + x / (METERS_PER_DEGREE * e.target_lat.to_radians().cos());
        (lon, lat)
    }

    fn lon_lat_to_xy(&self, lon: f64, lat: f64) -> (f64, f64) {
        let e = &self.config.episode;
        (
            (lon - e.target_lon) * METERS_PER_DEGREE * e.target_lat.to_radians().cos(),
            (lat - e.target_lat) * METERS_PER_DEGREE,
        )
    }

    /// Starts a new episode; identical seeds give identical episodes.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = &self.config.episode;
        let grid = rng.random_range(0..self.grids.len());
        let start_time = uniform(&mut rng, e.start_time);
        let dlon = uniform(&mut rng, [-e.init_offset, e.init_offset]);
        let dlat = uniform(&mut rng, [-e.init_offset, e.init_offset]);
        let altitude = uniform(&mut rng, e.init_altitude);
        let noise_seed: u64 = rng.random();
        let (x, y) = self.lon_lat_to_xy(e.target_lon + dlon, e.target_lat + dlat);

        let consts = &self.config.physics;
        let helium_mols = e
            .helium_mols
            .unwrap_or((e.payload_mass + e.sand_mass) / (consts.molar_mass_air - consts.molar_mass_helium));
        let state = BalloonState {
            x,
            y,
            h: altitude,
            h_dot: 0.0,
            payload_mass: e.payload_mass,
            sand_mass: e.sand_mass,
            helium_mols,
            t: 0.0,
        };
        self.trace.clear();
        if self.record_trace {
            self.trace.push(trace_point(&state));
        }
        self.episode = Some(Episode {
            grid,
            start_time,
            noise: WindNoise::new(NoiseConfig {
                seed: self.config.noise.seed ^ noise_seed,
                ..self.config.noise
            }),
            state,
            initial: state,
            altitude_history: [altitude; 3],
            rate_history: [0.0; 3],
            float_history: [-1.0; 3],
            distances_km: Vec::with_capacity(self.config.strides_per_episode()),
            cumulative_reward: 0.0,
            vented_mols: 0.0,
            dropped_kg: 0.0,
            termination: None,
        });
        self.observation()
    }

    fn wind_at(&self, episode: &Episode, state: &BalloonState, pressure: f64) -> WindSample {
        let (lon, lat) = self.xy_to_lon_lat(state.x, state.y);
        let t = episode.start_time + state.t;
        self.grids[episode.grid].sample(lon, lat, pressure, t)
    }

    /// Wind the balloon actually experiences: forecast plus noise.
    fn true_wind(&self, episode: &Episode, state: &BalloonState, pressure: f64) -> WindSample {
        let (lon, lat) = self.xy_to_lon_lat(state.x, state.y);
        let t = episode.start_time + state.t;
        let forecast = self.grids[episode.grid].sample(lon, lat, pressure, t);
        episode.noise.augment(forecast, lon, lat, pressure, t)
    }

    pub fn raw_features(&self) -> Option<RawFeatures> {
        self.episode.as_ref().map(|e| self.features(e))
    }

    fn features(&self, episode: &Episode) -> RawFeatures {
        let s = &episode.state;
        let consts = &self.config.physics;
        let atm = self
            .atmosphere
            .sample(s.h.clamp(0.0, crate::atmosphere::MAX_ALTITUDE))
            .expect("clamped altitude is in range");
        let levels = wind_pressure_levels();
        let mut wind_speeds = [0.0; WIND_LEVELS];
        let mut wind_bearings = [0.0; WIND_LEVELS];
        for (k, &p) in levels.iter().enumerate() {
            let w = self.wind_at(episode, s, p);
            wind_speeds[k] = w.speed();
            wind_bearings[k] = bearing_error(w, s.x, s.y);
        }
        let local = self.true_wind(episode, s, atm.pressure);
        let volume = s.volume(&atm, consts);
        RawFeatures {
            wind_speeds,
            wind_bearings,
            altitude: s.h,
            ascent_rate: s.h_dot,
            local_speed: local.speed(),
            local_bearing: bearing_error(local, s.x, s.y),
            area: drag_area(volume),
            volume,
            total_mass: s.total_mass(consts),
            distance: s.distance(),
            heading: heading_to_target(s.x, s.y),
            altitude_history: episode.altitude_history,
            rate_history: episode.rate_history,
            float_history: episode.float_history,
            sand: s.sand_mass,
            helium: s.helium_mols,
        }
    }

    fn observe(&self, episode: &Episode) -> Observation {
        let init = &episode.initial;
        self.features(episode).normalize(
            &self.config.normalization,
            init.total_mass(&self.config.physics),
            init.sand_mass,
            init.helium_mols,
        )
    }

    fn observation(&self) -> Observation {
        self.observe(self.episode.as_ref().expect("episode active"))
    }

    /// Policy-space step: `action` in `[-1, 1]^3` is clipped and scaled.
    pub fn step_normalized(&mut self, action: [f64; 3]) -> Result<StepResult, EnvError> {
        self.step(CommandTriple::from_normalized(action))
    }

    pub fn step(&mut self, cmd: CommandTriple) -> Result<StepResult, EnvError> {
        self.step_with(StepCommand::Command(cmd))
    }

    pub fn step_with(&mut self, command: StepCommand) -> Result<StepResult, EnvError> {
        let mut episode = self.episode.take().ok_or(EnvError::NotReset)?;
        if episode.termination.is_some() {
            self.episode = Some(episode);
            return Err(EnvError::StepAfterDone);
        }
        let result = self.advance(&mut episode, command);
        self.episode = Some(episode);
        Ok(result)
    }

    fn advance(&mut self, episode: &mut Episode, command: StepCommand) -> StepResult {
        let consts = self.config.physics;
        let thresholds = self.config.thresholds;
        let before = episode.state;
        let atm = self
            .atmosphere
            .sample(before.h)
            .expect("altitude stays in range between strides");

        let float_flag = match command {
            StepCommand::Command(c) => c.float_flag,
            StepCommand::Float => 1.0,
            _ => -1.0,
        };
        let decision = match command {
            StepCommand::Command(cmd) => controller::decide(&cmd, &before, &atm, &thresholds, &consts),
            StepCommand::Rate(rate) => controller::decide_rate(rate, &before, &atm, &thresholds, &consts),
            StepCommand::Float => decision(ControlAction::Float),
            StepCommand::Hold => decision(ControlAction::DoNothing),
            StepCommand::Vent(mols) => {
                let mols = mols.clamp(0.0, before.helium_mols);
                decision(ControlAction::Vent { mols })
            }
            StepCommand::Ballast(kg) => {
                let mut d = decision(ControlAction::Ballast {
                    kg: kg.max(0.0).min(before.sand_mass),
                });
                if kg > before.sand_mass {
                    d.exhausted = Some(Resource::Sand);
                }
                d
            }
        };

        let mut state = before;
        let mut vented = 0.0;
        let mut dropped = 0.0;
        let mut exhausted = decision.exhausted;
        let mut note = decision.note.clone();
        match decision.action {
            ControlAction::DoNothing => {}
            ControlAction::Vent { mols } => {
                vented = mols.min(state.helium_mols);
                state.helium_mols -= vented;
            }
            ControlAction::Ballast { kg } => {
                dropped = kg.min(state.sand_mass);
                state.sand_mass = if dropped >= state.sand_mass {
                    0.0
                } else {
                    state.sand_mass - dropped
                };
            }
            ControlAction::Float => match float_adjustment(&state, &atm, &consts) {
                Ok(adj) => {
                    let trimmed = adj.apply(&state).expect("checked by float_adjustment");
                    vented = state.helium_mols - trimmed.helium_mols;
                    dropped = state.sand_mass - trimmed.sand_mass;
                    state = trimmed;
                }
                Err(SolverError::InsufficientSand { .. }) => {
                    dropped = state.sand_mass;
                    state.sand_mass = 0.0;
                    exhausted = Some(Resource::Sand);
                    note = Some("float needs more sand than remains".into());
                }
                Err(err) => {
                    exhausted = Some(Resource::Helium);
                    note = Some(err.to_string());
                }
            },
        }
        episode.vented_mols += vented;
        episode.dropped_kg += dropped;

        let mut termination = exhausted.map(|_| Termination::Resources);
        match self.integrate_stride(episode, state) {
            Ok(next) => episode.state = next,
            Err((partial, err)) => {
                episode.state = partial;
                note = Some(err.to_string());
                termination = Some(Termination::Physics);
            }
        }

        episode.altitude_history = [before.h, episode.altitude_history[0], episode.altitude_history[1]];
        episode.rate_history = [before.h_dot, episode.rate_history[0], episode.rate_history[1]];
        episode.float_history = [float_flag, episode.float_history[0], episode.float_history[1]];

        let distance_km = episode.state.distance() / 1000.0;
        let reward = self.config.reward.reward(distance_km);
        episode.distances_km.push(distance_km);
        episode.cumulative_reward += reward;
        let strides = episode.distances_km.len();
        let truncated = termination.is_none() && strides >= self.config.strides_per_episode();
        if truncated {
            termination = Some(Termination::Time);
        }
        episode.termination = termination;

        let info = StepInfo {
            action: decision.action,
            desired_rate: decision.desired_rate,
            vented_mols: vented,
            dropped_kg: dropped,
            distance_km,
            tw50_so_far: tw50(
                &episode.distances_km,
                self.config.reward.radius,
                self.config.strides_per_episode(),
            ),
            strides,
            termination,
            note,
        };
        StepResult {
            observation: self.observe(episode),
            reward,
            terminated: termination.is_some_and(|t| t != Termination::Time),
            truncated,
            info,
        }
    }

    /// Integrates one stride. On failure returns the last good state.
    fn integrate_stride(
        &mut self,
        episode: &Episode,
        mut state: BalloonState,
    ) -> Result<BalloonState, (BalloonState, DynamicsError)> {
        let dt = self.config.episode.inner_step;
        let steps = (self.config.thresholds.stride / dt).round() as usize;
        let consts = self.config.physics;
        for _ in 0..steps {
            let atm = self.atmosphere.sample(state.h).map_err(|e| (state, e.into()))?;
            let wind = self.true_wind(episode, &state, atm.pressure);
            state = dynamics::step(&state, wind, dt, &self.atmosphere, &consts).map_err(|e| (state, e))?;
            if self.record_trace {
                self.trace.push(trace_point(&state));
            }
        }
        Ok(state)
    }

    /// Per-stride log row for the result of the most recent step.
    pub fn trajectory_row(&self, command: &StepCommand, result: &StepResult) -> Option<TrajectoryRow> {
        let s = self.state()?;
        let (a0, a1, a2) = match command {
            StepCommand::Command(c) => (c.altitude, c.time_factor, c.float_flag),
            StepCommand::Float => (f64::NAN, f64::NAN, 1.0),
            _ => (f64::NAN, f64::NAN, -1.0),
        };
        Some(TrajectoryRow {
            stride: result.info.strides,
            t: s.t,
            x: s.x,
            y: s.y,
            h: s.h,
            h_dot: s.h_dot,
            a0,
            a1,
            a2,
            action: result.info.action.label(),
            vented_mol: result.info.vented_mols,
            dropped_kg: result.info.dropped_kg,
            reward: result.reward,
            distance_km: result.info.distance_km,
        })
    }
}

fn decision(action: ControlAction) -> Decision {
    Decision {
        action,
        desired_rate: None,
        exhausted: None,
        note: None,
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn trace_point(s: &BalloonState) -> TracePoint {
    TracePoint {
        t: s.t,
        x: s.x,
        y: s.y,
        h: s.h,
        h_dot: s.h_dot,
    }
}
