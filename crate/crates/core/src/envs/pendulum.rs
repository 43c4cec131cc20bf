//! Torque-limited inverted pendulum with the classic swing-up constants.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use super::{Env, EnvStep};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumConfig {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    pub episode_length: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            episode_length: 200,
        }
    }
}

impl PendulumConfig {
    /// Most negative reward a single step can produce.
    pub fn min_reward(&self) -> f64 {
        -(PI * PI + 0.1 * self.max_speed * self.max_speed + 0.001 * self.max_torque * self.max_torque)
    }
}

/// Angle (0 = upright) and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
    pub t: usize,
}

/// Wraps an angle into `[-pi, pi)`.
pub fn angle_normalize(x: f64) -> f64 {
    let shifted = x + PI;
    shifted - 2.0 * PI * math::floor(shifted / (2.0 * PI)) - PI
}

pub fn pendulum_observation(state: &PendulumState) -> Vec<f64> {
    vec![math::cos(state.theta), math::sin(state.theta), state.theta_dot]
}

pub fn pendulum_reset(config: &PendulumConfig, episode_seed: u64) -> (PendulumState, EnvStep) {
    let _ = config;
    let mut r = rng::seeded(episode_seed);
    let state = PendulumState {
        theta: rng::uniform(&mut r, -PI, PI),
        theta_dot: rng::uniform(&mut r, -1.0, 1.0),
        t: 0,
    };
    let step = EnvStep {
        observation: pendulum_observation(&state),
        reward: 0.0,
        done: false,
        t: 0,
    };
    (state, step)
}

/// One semi-implicit Euler step. The cost is charged on the pre-step state;
/// the new angle uses the unclipped velocity, which is clipped afterwards.
pub fn pendulum_step(state: PendulumState, torque: f64, config: &PendulumConfig) -> (PendulumState, EnvStep) {
    let PendulumConfig {
        gravity: g,
        mass: m,
        length: l,
        dt,
        max_torque,
        max_speed,
        episode_length,
    } = *config;
    let u = if torque.is_nan() {
        0.0
    } else {
        torque.clamp(-max_torque, max_torque)
    };
    let th = state.theta;
    let thdot = state.theta_dot;
    let wrapped = angle_normalize(th);
    let cost = wrapped * wrapped + 0.1 * thdot * thdot + 0.001 * u * u;

    let accel = 3.0 * g / (2.0 * l) * math::sin(th) + 3.0 / (m * l * l) * u;
    let new_thdot = thdot + accel * dt;
    let new_th = th + new_thdot * dt;
    let next = PendulumState {
        theta: new_th,
        theta_dot: new_thdot.clamp(-max_speed, max_speed),
        t: state.t + 1,
    };
    let step = EnvStep {
        observation: pendulum_observation(&next),
        reward: -cost,
        done: next.t >= episode_length,
        t: next.t,
    };
    (next, step)
}

/// [`Env`] wrapper around [`pendulum_reset`]/[`pendulum_step`].
#[derive(Debug, Clone)]
pub struct Pendulum {
    config: PendulumConfig,
    state: PendulumState,
}

impl Pendulum {
    pub fn new(config: PendulumConfig) -> Self {
        Self {
            config,
            state: PendulumState {
                theta: 0.0,
                theta_dot: 0.0,
                t: 0,
            },
        }
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }
}

impl Env for Pendulum {
    fn obs_dim(&self) -> usize {
        3
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn action_bound(&self) -> f64 {
        self.config.max_torque
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, episode_seed: u64) -> EnvStep {
        let (state, step) = pendulum_reset(&self.config, episode_seed);
        self.state = state;
        step
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        let (state, step) = pendulum_step(self.state, action[0], &self.config);
        self.state = state;
        step
    }
}
