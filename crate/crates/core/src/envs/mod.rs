//! Seedable episodic environments behind one interface.

mod noise;
mod pendulum;
mod toy;

pub use noise::{noise_eval, GoalSignal, SimplexNoise};
pub use pendulum::{
    angle_normalize, pendulum_observation, pendulum_reset, pendulum_step, Pendulum, PendulumConfig, PendulumState,
};
pub use toy::{toy_reset, toy_step, ToyConfig, ToyState, ToyTrack};

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use serde::{Deserialize, Serialize};

use crate::Error;

/// What an environment reports after `reset` or `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Episode over. Both environments here end only on their time limit.
    pub done: bool,
    /// Index of the step that produced this observation (0 after reset).
    pub t: usize,
}

pub trait Env {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Actions are clipped to `[-bound, bound]` componentwise.
    fn action_bound(&self) -> f64;
    fn episode_length(&self) -> usize;
    fn reset(&mut self, episode_seed: u64) -> EnvStep;
    fn step(&mut self, action: &[f64]) -> EnvStep;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Toy,
    Pendulum,
}

impl EnvKind {
    pub const ALL: [EnvKind; 2] = [EnvKind::Toy, EnvKind::Pendulum];

    pub fn name(self) -> &'static str {
        match self {
            Self::Toy => "toy",
            Self::Pendulum => "pendulum",
        }
    }

    /// A fresh instance with default constants.
    pub fn make(self) -> Box<dyn Env + Send> {
        match self {
            Self::Toy => Box::new(ToyTrack::new(ToyConfig::default())),
            Self::Pendulum => Box::new(Pendulum::new(PendulumConfig::default())),
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            Self::Toy => 1,
            Self::Pendulum => 3,
        }
    }

    pub fn act_dim(self) -> usize {
        1
    }

    pub fn action_bound(self) -> f64 {
        match self {
            Self::Toy => ToyConfig::default().action_bound,
            Self::Pendulum => PendulumConfig::default().max_torque,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "toy" => Ok(Self::Toy),
            "pendulum" => Ok(Self::Pendulum),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }
}
