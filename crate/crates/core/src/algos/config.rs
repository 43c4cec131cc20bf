use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::nn::HiddenActivation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Ddpg,
    Td3,
    Sac,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Ddpg, Algo::Td3, Algo::Sac];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ddpg => "ddpg",
            Self::Td3 => "td3",
            Self::Sac => "sac",
        }
    }

    /// The hidden sizes each algorithm is usually published with.
    pub fn baseline_hidden(self) -> Vec<usize> {
        match self {
            Self::Ddpg | Self::Td3 => vec![400, 300],
            Self::Sac => vec![256, 256],
        }
    }

    pub fn twin_critics(self) -> bool {
        !matches!(self, Self::Ddpg)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Self::Ddpg),
            "td3" => Ok(Self::Td3),
            "sac" => Ok(Self::Sac),
            other => Err(Error::UnknownAlgo(other.to_string())),
        }
    }
}

/// Hidden-layer sizes of the actor and of the critic, set independently.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArchPair {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl ArchPair {
    pub fn new(actor_hidden: &[usize], critic_hidden: &[usize]) -> Self {
        Self {
            actor_hidden: actor_hidden.to_vec(),
            critic_hidden: critic_hidden.to_vec(),
        }
    }

    pub fn symmetric(hidden: &[usize]) -> Self {
        Self::new(hidden, hidden)
    }

    pub fn is_symmetric(&self) -> bool {
        self.actor_hidden == self.critic_hidden
    }
}

impl fmt::Display for ArchPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a{}_c{}",
            HiddenSizes(&self.actor_hidden),
            HiddenSizes(&self.critic_hidden)
        )
    }
}

/// Formats a hidden-size list as `16x16` (empty list: `lin`).
pub struct HiddenSizes<'a>(pub &'a [usize]);

impl fmt::Display for HiddenSizes<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("lin");
        }
        for (i, h) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

/// SAC entropy temperature: a constant, or tuned towards `-act_dim` entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AlphaRepr", into = "AlphaRepr")]
pub enum Alpha {
    Fixed(f64),
    /// Learned, starting from 1.
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Fixed(f64),
    Named(AlphaName),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AlphaName {
    Auto,
}

impl From<AlphaRepr> for Alpha {
    fn from(r: AlphaRepr) -> Self {
        match r {
            AlphaRepr::Fixed(v) => Self::Fixed(v),
            AlphaRepr::Named(AlphaName::Auto) => Self::Auto,
        }
    }
}

impl From<Alpha> for AlphaRepr {
    fn from(a: Alpha) -> Self {
        match a {
            Alpha::Fixed(v) => Self::Fixed(v),
            Alpha::Auto => Self::Named(AlphaName::Auto),
        }
    }
}

/// How the deterministic actors (DDPG/TD3) map to actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorOutput {
    /// Raw linear output, clipped to the action bounds when executed.
    Linear,
    /// `bound * tanh(z)`.
    TanhScaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub algo: Algo,
    pub arch: ArchPair,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Uniform-random actions for this many initial environment steps.
    pub start_steps: usize,
    pub update_after: usize,
    /// Every this many environment steps, run this many gradient updates.
    pub update_every: usize,
    /// DDPG/TD3 exploration noise, as a fraction of the action bound.
    pub exploration_sigma: f64,
    /// TD3 target smoothing noise and its clip, as fractions of the bound.
    pub target_noise_sigma: f64,
    pub target_noise_clip: f64,
    pub policy_delay: usize,
    pub alpha: Alpha,
    pub total_steps: usize,
    pub hidden_activation: HiddenActivation,
    pub actor_output: ActorOutput,
    /// Episodes in the final deterministic evaluation.
    pub eval_episodes: usize,
    /// Period (environment steps) of the best-seen evaluation; 0 disables it.
    pub eval_every: usize,
}

impl AgentConfig {
    pub fn defaults(algo: Algo, env: EnvKind) -> Self {
        let (total_steps, actor_output) = match env {
            EnvKind::Toy => (30_000, ActorOutput::Linear),
            EnvKind::Pendulum => (50_000, ActorOutput::TanhScaled),
        };
        Self {
            algo,
            arch: ArchPair::symmetric(&algo.baseline_hidden()),
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            // TD3 trains half as many actor steps; larger batches keep small
            // actors from stalling.
            batch_size: match algo {
                Algo::Td3 => 256,
                Algo::Ddpg | Algo::Sac => 128,
            },
            replay_capacity: 1_000_000,
            start_steps: 1_000,
            update_after: 1_000,
            update_every: 50,
            exploration_sigma: 0.1,
            target_noise_sigma: 0.2,
            target_noise_clip: 0.5,
            policy_delay: 2,
            alpha: Alpha::Fixed(0.2),
            total_steps,
            hidden_activation: HiddenActivation::Relu,
            actor_output,
            eval_episodes: 50,
            eval_every: 5_000,
        }
    }

    pub fn with_arch(mut self, arch: ArchPair) -> Self {
        self.arch = arch;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.update_every == 0 || self.policy_delay == 0 {
            return bad("batch_size, update_every and policy_delay must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity must be at least batch_size");
        }
        if self.exploration_sigma < 0.0 || self.target_noise_sigma < 0.0 || self.target_noise_clip < 0.0 {
            return bad("noise scales must be non-negative");
        }
        if let Alpha::Fixed(a) = self.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return bad("alpha must be a non-negative number or \"auto\"");
            }
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive");
        }
        for (name, sizes) in [("actor", &self.arch.actor_hidden), ("critic", &self.arch.critic_hidden)] {
            if sizes.len() > crate::nn::MAX_HIDDEN_LAYERS || sizes.contains(&0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} hidden sizes {sizes:?} must be at most two positive widths"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for algo in Algo::ALL {
            for env in EnvKind::ALL {
                AgentConfig::defaults(algo, env).validate().unwrap();
            }
        }
    }

    #[test]
    fn baselines() {
        assert_eq!(Algo::Ddpg.baseline_hidden(), vec![400, 300]);
        assert_eq!(Algo::Td3.baseline_hidden(), vec![400, 300]);
        assert_eq!(Algo::Sac.baseline_hidden(), vec![256, 256]);
    }

    #[test]
    fn arch_labels() {
        assert_eq!(ArchPair::new(&[], &[16, 16]).to_string(), "alin_c16x16");
        assert_eq!(ArchPair::symmetric(&[4, 4]).to_string(), "a4x4_c4x4");
        assert!(ArchPair::symmetric(&[8]).is_symmetric());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = AgentConfig::defaults(Algo::Ddpg, EnvKind::Toy);
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::defaults(Algo::Ddpg, EnvKind::Toy);
        c.arch.actor_hidden = vec![4, 4, 4];
        assert!(c.validate().is_err());
        let mut c = AgentConfig::defaults(Algo::Sac, EnvKind::Toy);
        c.alpha = Alpha::Fixed(-0.1);
        assert!(c.validate().is_err());
    }

    #[test]
    fn algo_names() {
        for a in Algo::ALL {
            assert_eq!(a.name().parse::<Algo>().unwrap(), a);
        }
        assert!(matches!("ppo".parse::<Algo>(), Err(Error::UnknownAlgo(_))));
    }
}
