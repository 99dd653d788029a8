//! Run configuration file.
//!
//! A TOML document with optional sections `[wind]`, `[episode]`, `[reward]`,
//! `[thresholds]`, `[physics]`, `[noise]`, `[normalization]`, `[sac]` and
//! `[train]`. Missing keys take their defaults; unknown keys are errors.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::controller::ControlThresholds;
use crate::dynamics::PhysicsConstants;
use crate::environment::{EnvConfig, EpisodeConfig, Normalization, RewardParams};
use crate::sac::{SacConfig, TrainConfig};
use crate::wind_field::{self, synth, NoiseConfig, SynthParams, WindError, WindGrid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindSource {
    Synth,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    pub source: WindSource,
    /// One synthetic grid per seed; episodes pick a grid at random.
    pub seeds: Vec<u64>,
    pub synth: SynthParams,
    /// Grid files for `source = "file"`, relative to the config file.
    pub files: Vec<PathBuf>,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            source: WindSource::Synth,
            seeds: vec![0, 1, 2, 3],
            synth: SynthParams::default(),
            files: Vec::new(),
        }
    }
}

impl WindConfig {
    /// Short human-readable description of where winds come from.
    pub fn describe(&self) -> String {
        match self.source {
            WindSource::Synth => format!("synth:{}:seeds={:?}", self.synth.regime.name(), self.seeds),
            WindSource::File => format!(
                "file:{}",
                self.files
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }

    pub fn load_grids(&self) -> Result<Vec<WindGrid>, WindError> {
        match self.source {
            WindSource::Synth => Ok(self.seeds.iter().map(|&s| synth(s, &self.synth)).collect()),
            WindSource::File => self.files.iter().map(wind_field::load).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub wind: WindConfig,
    pub episode: EpisodeConfig,
    pub reward: RewardParams,
    pub thresholds: ControlThresholds,
    pub physics: PhysicsConstants,
    pub noise: NoiseConfig,
    pub normalization: Normalization,
    pub sac: SacConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file; relative wind file paths are
    /// resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for f in &mut config.wind.files {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            episode: self.episode.clone(),
            reward: self.reward,
            thresholds: self.thresholds,
            physics: self.physics,
            noise: self.noise,
            normalization: self.normalization,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        match self.wind.source {
            WindSource::Synth if self.wind.seeds.is_empty() => {
                return Err(invalid("wind.seeds must name at least one synthetic grid".into()))
            }
            WindSource::File if self.wind.files.is_empty() => {
                return Err(invalid("wind.files must list at least one grid".into()))
            }
            _ => {}
        }
        let s = &self.wind.synth;
        if !(s.half_width > 0.0 && s.resolution > 0.0 && s.pressure_levels >= 2 && s.time_steps >= 2) {
            return Err(invalid(
                "wind.synth needs positive extent and at least two levels and times".into(),
            ));
        }
        if !(s.pressure_min > 0.0 && s.pressure_min < s.pressure_max && s.time_step > 0.0) {
            return Err(invalid("wind.synth pressure range or time step is invalid".into()));
        }
        self.env_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.sac.validate().map_err(|e| invalid(e.to_string()))?;
        if self.train.episodes == 0 {
            return Err(invalid("train.episodes must be positive".into()));
        }
        Ok(())
    }
}
