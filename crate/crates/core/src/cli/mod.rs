//! Command implementations behind the `stationkeep` binary.
//!
//! Every command writes into one output directory holding a `manifest.json`
//! and the resolved `config.toml` it ran with. Exit codes: 0 success,
//! 2 configuration error, 3 data or format error, 4 runtime failure.

pub mod script;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::environment::{EnvError, Environment, StepCommand, TrajectoryRow, ACTION_DIM, OBS_DIM};
use crate::sac::checkpoint::{self, Progress};
use crate::sac::{evaluate, Agent, EvalEpisode, SacError, Trainer};
use crate::wind_field::{self, Regime, WindError, WindGrid};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<WindError> for CliError {
    fn from(e: WindError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<SacError> for CliError {
    fn from(e: SacError) -> Self {
        match e {
            SacError::Config(_) => CliError::Config(e.to_string()),
            SacError::Checkpoint(_) | SacError::ShapeMismatch { .. } => CliError::Data(e.to_string()),
            SacError::Env(env) => env.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "stationkeep",
    version,
    about = "Balloon station-keeping simulator and SAC trainer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a scripted flight through the controller and physics.
    Simulate(SimulateArgs),
    /// Train a SAC agent.
    Train(TrainArgs),
    /// Evaluate a checkpoint with the deterministic policy.
    Eval(EvalArgs),
    /// Write an untrained checkpoint.
    Init(RunArgs),
    /// Write observations and rewards of a scripted episode.
    Rollout(SimulateArgs),
    /// Generate a synthetic wind grid.
    Windgen(WindgenArgs),
    /// Convert a wind CSV into the binary grid format.
    Windconvert(WindconvertArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the synthetic wind regime.
    #[arg(long)]
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Flight script; an absent script holds for the whole episode.
    #[arg(long)]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Episodes to run in this invocation.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct WindgenArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct WindconvertArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Manifest {
    command: &'static str,
    config_path: Option<String>,
    config_sha256: String,
    seed: u64,
    version: &'static str,
    wind_source: String,
    out_dir: String,
    started_unix: u64,
    finished_unix: u64,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Output directory of one command invocation.
struct RunDir {
    path: PathBuf,
    manifest: Manifest,
}

impl RunDir {
    fn create(command: &'static str, args: &RunArgs, config: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&args.out)?;
        let text = config.to_toml();
        fs::write(args.out.join("config.toml"), &text)?;
        Ok(Self {
            path: args.out.clone(),
            manifest: Manifest {
                command,
                config_path: args.config.as_ref().map(|p| p.display().to_string()),
                config_sha256: hex::encode(Sha256::digest(text.as_bytes())),
                seed: args.seed,
                version: env!("CARGO_PKG_VERSION"),
                wind_source: config.wind.describe(),
                out_dir: args.out.display().to_string(),
                started_unix: now(),
                finished_unix: 0,
            },
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.manifest.finished_unix = now();
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serialises");
        fs::write(self.file("manifest.json"), json + "\n")?;
        Ok(())
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(regime) = args.regime {
        config.wind.synth.regime = regime;
    }
    Ok(config)
}

fn environment(config: &RunConfig) -> Result<Environment, CliError> {
    let grids: Vec<WindGrid> = config.wind.load_grids()?;
    Ok(Environment::new(config.env_config(), Arc::new(grids))?)
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("report serialises");
    fs::write(path, json + "\n")?;
    Ok(())
}

fn read_script(path: &Option<PathBuf>) -> Result<Vec<StepCommand>, CliError> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            script::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Rollout(a) => rollout(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Init(a) => init(&a),
        Command::Windgen(a) => windgen(&a),
        Command::Windconvert(a) => windconvert(&a),
    }
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    strides: usize,
    termination: &'static str,
    cumulative_reward: f64,
    tw50: f64,
    sand_used_kg: f64,
    helium_used_mol: f64,
    min_altitude_m: f64,
    max_altitude_m: f64,
    final_distance_km: f64,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = load_config(&args.run)?;
    let commands = read_script(&args.script)?;
    let mut env = environment(&config)?;
    let dir = RunDir::create("simulate", &args.run, &config)?;
    env.set_trace(true);
    env.reset(args.run.seed);
    let mut rows: Vec<TrajectoryRow> = Vec::new();
    let strides = config.env_config().strides_per_episode();
    for k in 0..strides {
        let command = commands.get(k).copied().unwrap_or(StepCommand::Hold);
        let result = env.step_with(command)?;
        rows.extend(env.trajectory_row(&command, &result));
        if result.terminated || result.truncated {
            break;
        }
    }
    let summary = env.summary().expect("episode ran");
    let trace = env.trace();
    let (lo, hi) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.h), hi.max(p.h))
    });
    write_csv(&dir.file("trajectory.csv"), &rows)?;
    write_csv(&dir.file("trace.csv"), trace)?;
    write_json(
        &dir.file("summary.json"),
        &SimulationSummary {
            strides: summary.strides,
            termination: summary.termination.map_or("running", |t| t.label()),
            cumulative_reward: summary.cumulative_reward,
            tw50: summary.tw50,
            sand_used_kg: summary.sand_used_kg,
            helium_used_mol: summary.helium_used_mol,
            min_altitude_m: lo,
            max_altitude_m: hi,
            final_distance_km: summary.state.distance() / 1000.0,
        },
    )?;
    dir.finish()
}

pub fn rollout(args: &SimulateArgs) -> Result<(), CliError> {
    let config = load_config(&args.run)?;
    let commands = read_script(&args.script)?;
    let mut env = environment(&config)?;
    let dir = RunDir::create("rollout", &args.run, &config)?;
    let mut w = csv::Writer::from_path(dir.file("observations.csv"))?;
    let mut header = vec![
        "stride".to_string(),
        "reward".into(),
        "terminated".into(),
        "truncated".into(),
        "tw50".into(),
    ];
    header.extend((0..OBS_DIM).map(|i| format!("obs_{i}")));
    w.write_record(&header)?;
    let mut record = |stride: usize, reward: f64, term: bool, trunc: bool, tw50: f64, obs: &[f64]| {
        let mut r = vec![
            stride.to_string(),
            reward.to_string(),
            term.to_string(),
            trunc.to_string(),
            tw50.to_string(),
        ];
        r.extend(obs.iter().map(|v| v.to_string()));
        w.write_record(&r)
    };
    let obs = env.reset(args.run.seed);
    record(0, 0.0, false, false, 0.0, obs.as_slice())?;
    for (k, command) in commands.iter().enumerate() {
        let r = env.step_with(*command)?;
        record(
            k + 1,
            r.reward,
            r.terminated,
            r.truncated,
            r.info.tw50_so_far,
            r.observation.as_slice(),
        )?;
        if r.terminated || r.truncated {
            break;
        }
    }
    w.flush()?;
    dir.finish()
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.run)?;
    if let Some(n) = args.episodes {
        if n == 0 {
            return Err(CliError::Config("--episodes must be positive".into()));
        }
        config.train.episodes = n;
    }
    let mut env = environment(&config)?;
    let (agent, progress) = match &args.resume {
        Some(path) => load_checkpoint(path)?,
        None => (
            Agent::new(config.sac.clone(), OBS_DIM, ACTION_DIM, args.run.seed)?,
            Progress::default(),
        ),
    };
    check_dims(&agent)?;
    let dir = RunDir::create("train", &args.run, &config)?;
    let ckpt_dir = dir.file("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let mut trainer = Trainer::resume(agent, progress, args.run.seed);
    let mut metrics = csv::Writer::from_path(dir.file("metrics.csv"))?;
    for _ in 0..config.train.episodes {
        let row = trainer.run_episode(&mut env)?;
        metrics.serialize(&row)?;
        metrics.flush()?;
        log::info!(
            "episode {} reward {:.2} tw50 {:.3} {} after {} strides",
            row.episode,
            row.cumulative_reward,
            row.tw50,
            row.termination_reason,
            row.strides
        );
        let done = trainer.progress.episodes;
        if config.train.checkpoint_every > 0 && done.is_multiple_of(config.train.checkpoint_every as u64) {
            checkpoint::save(
                &trainer.agent,
                trainer.progress,
                ckpt_dir.join(format!("episode_{done:06}.sack")),
            )?;
        }
    }
    checkpoint::save(&trainer.agent, trainer.progress, dir.file("final.sack"))?;
    dir.finish()
}

fn load_checkpoint(path: &Path) -> Result<(Agent, Progress), CliError> {
    checkpoint::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn check_dims(agent: &Agent) -> Result<(), CliError> {
    if agent.obs_dim != OBS_DIM || agent.act_dim != ACTION_DIM {
        return Err(CliError::Data(format!(
            "checkpoint expects {}-d observations and {}-d actions, environment has {OBS_DIM} and {ACTION_DIM}",
            agent.obs_dim, agent.act_dim
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EpisodeRow {
    episode: u64,
    seed: u64,
    cumulative_reward: f64,
    tw50: f64,
    termination_reason: &'static str,
    strides: usize,
    sand_used_kg: f64,
    helium_used_mol: f64,
}

#[derive(Debug, Serialize)]
struct BirdsEyeRow {
    episode: u64,
    stride: usize,
    x_km: f64,
    y_km: f64,
}

#[derive(Debug, Serialize)]
struct CircleRow {
    angle_deg: f64,
    x_km: f64,
    y_km: f64,
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let half = 1.96 * (var / n).sqrt();
        Self {
            mean,
            ci95_low: mean - half,
            ci95_high: mean + half,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub tw50: Estimate,
    pub cumulative_reward: Estimate,
    pub terminations: BTreeMap<&'static str, usize>,
}

pub fn report(episodes: &[EvalEpisode]) -> EvalReport {
    let mut terminations = BTreeMap::new();
    for e in episodes {
        *terminations.entry(e.termination).or_insert(0) += 1;
    }
    EvalReport {
        episodes: episodes.len(),
        tw50: Estimate::of(&episodes.iter().map(|e| e.tw50).collect::<Vec<_>>()),
        cumulative_reward: Estimate::of(&episodes.iter().map(|e| e.cumulative_reward).collect::<Vec<_>>()),
        terminations,
    }
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let config = load_config(&args.run)?;
    let episodes = args.episodes.unwrap_or(config.train.eval_episodes);
    if episodes == 0 {
        return Err(CliError::Config("evaluation needs at least one episode".into()));
    }
    let (agent, _) = load_checkpoint(&args.checkpoint)?;
    check_dims(&agent)?;
    let mut env = environment(&config)?;
    let dir = RunDir::create("eval", &args.run, &config)?;
    let results = evaluate(&mut env, &agent, episodes, args.run.seed, true)?;

    let traj_dir = dir.file("trajectories");
    fs::create_dir_all(&traj_dir)?;
    let mut birdseye = Vec::new();
    for e in &results {
        write_csv(&traj_dir.join(format!("episode_{:04}.csv", e.episode)), &e.trajectory)?;
        birdseye.extend(e.trajectory.iter().map(|r| BirdsEyeRow {
            episode: e.episode,
            stride: r.stride,
            x_km: r.x / 1000.0,
            y_km: r.y / 1000.0,
        }));
    }
    write_csv(&dir.file("birdseye.csv"), birdseye)?;
    let radius = config.reward.radius;
    write_csv(
        &dir.file("circle.csv"),
        (0..=360).map(|d| {
            let a = (d as f64).to_radians();
            CircleRow {
                angle_deg: d as f64,
                x_km: radius * a.cos(),
                y_km: radius * a.sin(),
            }
        }),
    )?;
    write_csv(
        &dir.file("episodes.csv"),
        results.iter().map(|e| EpisodeRow {
            episode: e.episode,
            seed: e.seed,
            cumulative_reward: e.cumulative_reward,
            tw50: e.tw50,
            termination_reason: e.termination,
            strides: e.strides,
            sand_used_kg: e.sand_used_kg,
            helium_used_mol: e.helium_used_mol,
        }),
    )?;
    let rep = report(&results);
    log::info!(
        "tw50 {:.3} [{:.3}, {:.3}] over {} episodes",
        rep.tw50.mean,
        rep.tw50.ci95_low,
        rep.tw50.ci95_high,
        rep.episodes
    );
    write_json(&dir.file("report.json"), &rep)?;
    dir.finish()
}

pub fn init(args: &RunArgs) -> Result<(), CliError> {
    let config = load_config(args)?;
    let agent = Agent::new(config.sac.clone(), OBS_DIM, ACTION_DIM, args.seed)?;
    let dir = RunDir::create("init", args, &config)?;
    checkpoint::save(&agent, Progress::default(), dir.file("init.sack"))?;
    dir.finish()
}

pub fn windgen(args: &WindgenArgs) -> Result<(), CliError> {
    let config = load_config(&args.run)?;
    let dir = RunDir::create("windgen", &args.run, &config)?;
    let grid = wind_field::synth(args.run.seed, &config.wind.synth);
    wind_field::save(&grid, dir.file("wind.wndg"))?;
    dir.finish()
}

pub fn windconvert(args: &WindconvertArgs) -> Result<(), CliError> {
    let run = RunArgs {
        config: None,
        seed: 0,
        out: args.out.clone(),
        regime: None,
    };
    let mut config = RunConfig::default();
    config.wind.source = crate::config::WindSource::File;
    config.wind.files = vec![args.csv.clone()];
    fs::create_dir_all(&args.out)?;
    wind_field::convert_csv(&args.csv, args.out.join("wind.wndg"))?;
    let dir = RunDir::create("windconvert", &run, &config)?;
    dir.finish()
}
