use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::agent::{ActionMode, Agent};
use super::buffer::{Batch, ReplayBuffer};
use super::config::AgentConfig;
use super::eval::{evaluate_policy, EvalStats};
use crate::envs::EnvKind;
use crate::rng;
use crate::Result;

const STREAM_TRAIN_EPISODES: u64 = 0x10;
const STREAM_EVAL: u64 = 0x20;
const STREAM_BUFFER: u64 = 0x30;
const STREAM_AGENT: u64 = 0x40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Environment steps taken when the episode finished.
    pub step: usize,
    pub ep_return: f64,
}

/// Losses averaged over one block of `update_every` gradient updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub step: usize,
    pub q_loss: f64,
    pub pi_loss: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEval {
    pub step: usize,
    pub stats: EvalStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
    pub gradient_steps: u64,
    /// `None` when the run diverged.
    pub final_eval: Option<EvalStats>,
    pub best_eval: Option<BestEval>,
    pub diverged: bool,
    pub divergence: Option<String>,
}

/// Seed from which a run's evaluation episodes are derived.
pub fn eval_seed(run_seed: u64) -> u64 {
    rng::derive_seed(run_seed, STREAM_EVAL)
}

pub fn train_episode_seed(run_seed: u64, episode: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(run_seed, STREAM_TRAIN_EPISODES), episode as u64)
}

/// Builds an agent sized for `env`.
pub fn make_agent(env: EnvKind, config: &AgentConfig, seed: u64) -> Result<Agent> {
    Agent::new(
        config.clone(),
        env.obs_dim(),
        env.act_dim(),
        env.action_bound(),
        rng::derive_seed(seed, STREAM_AGENT),
    )
}

/// Full interaction loop: random actions for `start_steps`, then
/// exploration; `update_every` updates every `update_every` steps once
/// `update_after` steps have been collected; deterministic evaluation at
/// the end. A non-finite loss or parameter stops the run and marks it
/// diverged instead of returning an error.
pub fn train_run(env: EnvKind, config: &AgentConfig, seed: u64) -> Result<(TrainLog, Agent)> {
    let mut agent = make_agent(env, config, seed)?;
    let mut instance = env.make();
    let mut buffer = ReplayBuffer::new(config.replay_capacity, env.obs_dim(), env.act_dim())?;
    let mut sample_rng = rng::seeded(rng::derive_seed(seed, STREAM_BUFFER));
    let mut batch = Batch::default();

    let mut log = TrainLog {
        seed,
        episodes: Vec::new(),
        updates: Vec::new(),
        gradient_steps: 0,
        final_eval: None,
        best_eval: None,
        diverged: false,
        divergence: None,
    };

    let mut episode = 0;
    let mut obs = instance.reset(train_episode_seed(seed, episode)).observation;
    let mut ep_return = 0.0;

    for t in 0..config.total_steps {
        let step_no = t + 1;
        let action = if t < config.start_steps {
            agent.random_action()
        } else {
            match agent.select_action(&obs, ActionMode::Explore) {
                Ok(a) => a,
                Err(e) => return Ok((diverge(log, format!("action selection: {e}")), agent)),
            }
        };
        let step = instance.step(&action);
        ep_return += step.reward;
        // Episodes here only end on the time limit, which is not a terminal
        // state for bootstrapping.
        let terminal = step.done && step.t < instance.episode_length();
        if let Err(e) = buffer.push_parts(&obs, &action, step.reward, &step.observation, terminal) {
            return Ok((diverge(log, format!("transition: {e}")), agent));
        }
        obs = step.observation;

        if step.done {
            log.episodes.push(EpisodeRecord {
                episode,
                step: step_no,
                ep_return,
            });
            episode += 1;
            ep_return = 0.0;
            obs = instance.reset(train_episode_seed(seed, episode)).observation;
        }

        if step_no >= config.update_after && step_no % config.update_every == 0 && buffer.len() >= config.batch_size {
            let mut q_sum = 0.0;
            let (mut pi_sum, mut pi_n) = (0.0, 0usize);
            let mut alpha = None;
            for _ in 0..config.update_every {
                let stats = buffer
                    .sample_into(config.batch_size, &mut sample_rng, &mut batch)
                    .and_then(|_| agent.update(&batch));
                let stats = match stats {
                    Ok(s) => s,
                    Err(e) => return Ok((diverge(log, format!("update at step {step_no}: {e}")), agent)),
                };
                log.gradient_steps += 1;
                q_sum += stats.q_loss;
                if let Some(p) = stats.pi_loss {
                    pi_sum += p;
                    pi_n += 1;
                }
                alpha = stats.alpha;
            }
            if !agent.is_finite() {
                return Ok((diverge(log, format!("non-finite parameters at step {step_no}")), agent));
            }
            log.updates.push(UpdateRecord {
                step: step_no,
                q_loss: q_sum / config.update_every as f64,
                pi_loss: (pi_n > 0).then(|| pi_sum / pi_n as f64),
                alpha,
            });
        }

        if config.eval_every > 0 && step_no % config.eval_every == 0 && step_no < config.total_steps {
            let stats = evaluate_policy(&mut agent, env, config.eval_episodes, eval_seed(seed))?;
            record_best(&mut log, step_no, stats);
        }
    }

    let stats = evaluate_policy(&mut agent, env, config.eval_episodes, eval_seed(seed))?;
    record_best(&mut log, config.total_steps, stats.clone());
    log.final_eval = Some(stats);
    Ok((log, agent))
}

fn record_best(log: &mut TrainLog, step: usize, stats: EvalStats) {
    let better = log.best_eval.as_ref().is_none_or(|b| stats.mean > b.stats.mean);
    if better {
        log.best_eval = Some(BestEval { step, stats });
    }
}

fn diverge(mut log: TrainLog, reason: String) -> TrainLog {
    log.diverged = true;
    log.divergence = Some(reason);
    log.final_eval = None;
    log
}
