//! Off-policy actor-critic learners with decoupled network sizes.

mod agent;
mod buffer;
mod config;
mod eval;
mod train;

pub use agent::{ActionMode, Agent, Critic, UpdateStats, LOG_STD_MAX, LOG_STD_MIN};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use config::{ActorOutput, AgentConfig, Algo, Alpha, ArchPair, HiddenSizes};
pub use eval::{episode_seed, evaluate_policy, mean_std, run_episode, EvalStats, Policy};
pub use train::{
    eval_seed, make_agent, train_episode_seed, train_run, BestEval, EpisodeRecord, TrainLog, UpdateRecord,
};
