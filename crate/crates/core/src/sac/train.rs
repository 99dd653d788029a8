//! Episode loop, metrics and evaluation.
//!
//! Every episode draws its environment seed and its own noise stream from
//! the run seed and the episode index, so a resumed run replays the same
//! starts and exploration noise as an uninterrupted one. The replay buffer
//! is not checkpointed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::Progress;
use super::{Agent, ReplayBuffer, SacError, Transition};
use crate::controller::CommandTriple;
use crate::environment::{Environment, StepCommand, Termination, TrajectoryRow, ACTION_DIM, OBS_DIM};
use crate::seed::derive;

/// Offset separating the exploration-noise stream from episode seeds.
const NOISE_STREAM: u64 = 0x5AC0_0000_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub episode: u64,
    pub cumulative_reward: f64,
    pub tw50: f64,
    pub termination_reason: &'static str,
    pub strides: usize,
    pub sand_used_kg: f64,
    pub helium_used_mol: f64,
    pub alpha: f64,
    /// Episode means over the updates performed; NaN before learning starts.
    pub actor_loss: f64,
    pub critic_loss: f64,
}

pub struct Trainer {
    pub agent: Agent,
    pub buffer: ReplayBuffer,
    pub progress: Progress,
    seed: u64,
}

fn label(t: Option<Termination>) -> &'static str {
    t.map_or("running", |t| t.label())
}

impl Trainer {
    pub fn new(agent: Agent, seed: u64) -> Self {
        Self::resume(agent, Progress::default(), seed)
    }

    pub fn resume(agent: Agent, progress: Progress, seed: u64) -> Self {
        let buffer = ReplayBuffer::new(agent.config.buffer_capacity, OBS_DIM, ACTION_DIM);
        Self {
            agent,
            buffer,
            progress,
            seed,
        }
    }

    pub fn env_seed(&self, episode: u64) -> u64 {
        derive(self.seed, episode)
    }

    /// Runs one training episode and returns its metrics row.
    pub fn run_episode(&mut self, env: &mut Environment) -> Result<MetricsRow, SacError> {
        let episode = self.progress.episodes;
        let mut rng = ChaCha8Rng::seed_from_u64(derive(self.seed ^ NOISE_STREAM, episode));
        let mut obs = env.reset(self.env_seed(episode));
        let config = self.agent.config.clone();
        let (mut actor_sum, mut critic_sum, mut n_updates) = (0.0, 0.0, 0usize);
        loop {
            let action: [f64; ACTION_DIM] = if (self.progress.total_strides as usize) < config.warmup_strides {
                std::array::from_fn(|_| rng.random_range(-1.0..1.0))
            } else {
                let a = self.agent.act(obs.as_slice(), &mut rng)?;
                std::array::from_fn(|i| a[i])
            };
            let result = env.step_normalized(action)?;
            self.buffer.push(&Transition {
                obs: obs.as_slice(),
                action: &action,
                reward: result.reward,
                next_obs: result.observation.as_slice(),
                done: result.terminated,
            });
            self.progress.total_strides += 1;
            obs = result.observation;

            if self.progress.total_strides as usize >= config.warmup_strides && self.buffer.len() >= config.batch_size {
                for _ in 0..config.updates_per_stride {
                    let batch = self.buffer.sample(config.batch_size, &mut rng);
                    let losses = self.agent.update(&batch, &mut rng)?;
                    actor_sum += losses.actor;
                    critic_sum += losses.critic;
                    n_updates += 1;
                }
            }
            if result.terminated || result.truncated {
                break;
            }
        }
        self.progress.episodes += 1;
        let summary = env.summary().expect("episode ran");
        let mean = |s: f64| if n_updates > 0 { s / n_updates as f64 } else { f64::NAN };
        Ok(MetricsRow {
            episode,
            cumulative_reward: summary.cumulative_reward,
            tw50: summary.tw50,
            termination_reason: label(summary.termination),
            strides: summary.strides,
            sand_used_kg: summary.sand_used_kg,
            helium_used_mol: summary.helium_used_mol,
            alpha: self.agent.alpha(),
            actor_loss: mean(actor_sum),
            critic_loss: mean(critic_sum),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub episode: u64,
    pub seed: u64,
    pub cumulative_reward: f64,
    pub tw50: f64,
    pub termination: &'static str,
    pub strides: usize,
    pub sand_used_kg: f64,
    pub helium_used_mol: f64,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Runs the deterministic policy `tanh(mu)` for `episodes` episodes seeded
/// from `seed`. Trajectories are kept when `record` is set.
pub fn evaluate(
    env: &mut Environment,
    agent: &Agent,
    episodes: usize,
    seed: u64,
    record: bool,
) -> Result<Vec<EvalEpisode>, SacError> {
    if episodes == 0 {
        return Err(SacError::Config("evaluation needs at least one episode".into()));
    }
    let mut out = Vec::with_capacity(episodes);
    for k in 0..episodes as u64 {
        let episode_seed = derive(seed, k);
        let mut obs = env.reset(episode_seed);
        let mut trajectory = Vec::new();
        loop {
            let a = agent.act_mean(obs.as_slice())?;
            let cmd = CommandTriple::from_normalized([a[0], a[1], a[2]]);
            let command = StepCommand::Command(cmd);
            let result = env.step_with(command)?;
            if record {
                trajectory.extend(env.trajectory_row(&command, &result));
            }
            obs = result.observation;
            if result.terminated || result.truncated {
                break;
            }
        }
        let s = env.summary().expect("episode ran");
        out.push(EvalEpisode {
            episode: k,
            seed: episode_seed,
            cumulative_reward: s.cumulative_reward,
            tw50: s.tw50,
            termination: label(s.termination),
            strides: s.strides,
            sand_used_kg: s.sand_used_kg,
            helium_used_mol: s.helium_used_mol,
            trajectory,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvConfig;
    use crate::sac::SacConfig;
    use crate::wind_field::{synth, SynthParams};
    use std::sync::Arc;

    fn short_env() -> Environment {
        let mut config = EnvConfig::default();
        config.episode.duration = 12.0 * 1200.0;
        Environment::new(config, Arc::new(vec![synth(0, &SynthParams::default())])).unwrap()
    }

    fn agent(warmup: usize) -> Agent {
        let config = SacConfig {
            hidden: vec![8, 8],
            batch_size: 4,
            warmup_strides: warmup,
            ..Default::default()
        };
        Agent::new(config, OBS_DIM, ACTION_DIM, 1).unwrap()
    }

    #[test]
    fn warmup_fills_buffer_one_transition_per_stride() {
        let mut env = short_env();
        let mut trainer = Trainer::new(agent(1000), 3);
        let mut strides = 0;
        for _ in 0..3 {
            let row = trainer.run_episode(&mut env).unwrap();
            strides += row.strides;
            assert_eq!(trainer.buffer.len(), strides);
            assert!(row.actor_loss.is_nan() && row.critic_loss.is_nan());
        }
        assert_eq!(trainer.progress.total_strides as usize, strides);
        assert_eq!(trainer.agent.updates, 0);
    }

    #[test]
    fn updates_start_after_warmup() {
        let mut env = short_env();
        let mut trainer = Trainer::new(agent(10), 3);
        let row = trainer.run_episode(&mut env).unwrap();
        assert_eq!(row.strides, 12);
        // Strides 10, 11 and 12 each run one update.
        assert_eq!(trainer.agent.updates, 3);
        assert!(row.actor_loss.is_finite() && row.critic_loss.is_finite());
    }

    #[test]
    fn evaluation_is_repeatable_and_rejects_zero_episodes() {
        let mut env = short_env();
        let a = agent(0);
        let first = evaluate(&mut env, &a, 3, 9, true).unwrap();
        assert_eq!(first, evaluate(&mut env, &a, 3, 9, true).unwrap());
        assert_eq!(first[1].seed, derive(9, 1));
        assert_eq!(first[0].trajectory.len(), first[0].strides);
        assert!(matches!(evaluate(&mut env, &a, 0, 9, false), Err(SacError::Config(_))));
    }
}
