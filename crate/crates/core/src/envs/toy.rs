//! One-dimensional goal tracking.
//!
//! The agent sees `o = g - s` and moves its internal state with
//! `s' = clip(s + a, -1, 1)`; the reward is `-|g' - s'|` against the next
//! goal. The policy `a = o` tracks the goal with a one-step lag.

use alloc::vec;
use serde::{Deserialize, Serialize};

use super::{Env, EnvStep, GoalSignal};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub episode_length: usize,
    /// Noise-space distance travelled per environment step.
    pub noise_frequency: f64,
    pub noise_seed: u64,
    pub action_bound: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            episode_length: 200,
            noise_frequency: 0.02,
            noise_seed: 0,
            action_bound: 1.0,
        }
    }
}

/// Per-episode state: the internal position, the step index and the
/// episode's offset into the goal signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyState {
    pub s: f64,
    pub t: usize,
    pub phase: f64,
}

/// Phase offsets are drawn from `[0, PHASE_SPAN)` steps.
const PHASE_SPAN: f64 = 10_000.0;

impl ToyState {
    pub fn goal(&self, goals: &GoalSignal) -> f64 {
        goals.at(self.phase + self.t as f64)
    }

    pub fn observation(&self, goals: &GoalSignal) -> f64 {
        self.goal(goals) - self.s
    }
}

pub fn toy_reset(config: &ToyConfig, goals: &GoalSignal, episode_seed: u64) -> (ToyState, EnvStep) {
    let _ = config;
    let mut r = rng::seeded(episode_seed);
    let s = rng::uniform(&mut r, -1.0, 1.0);
    let phase = rng::uniform(&mut r, 0.0, PHASE_SPAN);
    let state = ToyState { s, t: 0, phase };
    let step = EnvStep {
        observation: vec![state.observation(goals)],
        reward: 0.0,
        done: false,
        t: 0,
    };
    (state, step)
}

pub fn toy_step(state: ToyState, action: f64, config: &ToyConfig, goals: &GoalSignal) -> (ToyState, EnvStep) {
    let bound = config.action_bound;
    let a = if action.is_nan() {
        0.0
    } else {
        action.clamp(-bound, bound)
    };
    let next = ToyState {
        s: (state.s + a).clamp(-1.0, 1.0),
        t: state.t + 1,
        phase: state.phase,
    };
    let g = next.goal(goals);
    let step = EnvStep {
        observation: vec![g - next.s],
        reward: -(g - next.s).abs(),
        done: next.t >= config.episode_length,
        t: next.t,
    };
    (next, step)
}

/// [`Env`] wrapper around [`toy_reset`]/[`toy_step`].
#[derive(Debug, Clone)]
pub struct ToyTrack {
    config: ToyConfig,
    goals: GoalSignal,
    state: ToyState,
}

impl ToyTrack {
    pub fn new(config: ToyConfig) -> Self {
        let goals = GoalSignal::new(&config);
        Self {
            config,
            goals,
            state: ToyState {
                s: 0.0,
                t: 0,
                phase: 0.0,
            },
        }
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn goals(&self) -> &GoalSignal {
        &self.goals
    }

    pub fn state(&self) -> ToyState {
        self.state
    }
}

impl Env for ToyTrack {
    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn action_bound(&self) -> f64 {
        self.config.action_bound
    }

    fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    fn reset(&mut self, episode_seed: u64) -> EnvStep {
        let (state, step) = toy_reset(&self.config, &self.goals, episode_seed);
        self.state = state;
        step
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        let (state, step) = toy_step(self.state, action[0], &self.config, &self.goals);
        self.state = state;
        step
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (ToyConfig, GoalSignal) {
        let cfg = ToyConfig::default();
        let goals = GoalSignal::new(&cfg);
        (cfg, goals)
    }

    #[test]
    fn observation_is_goal_minus_state() {
        let (_, goals) = fixture();
        let state = ToyState {
            s: 0.5,
            t: 0,
            phase: 123.0,
        };
        let g = state.goal(&goals);
        assert_eq!(state.observation(&goals), g - 0.5);
        let at_goal = ToyState { s: g, ..state };
        assert_eq!(at_goal.observation(&goals), 0.0);
    }

    #[test]
    fn reset_is_seeded() {
        let (cfg, goals) = fixture();
        let (s1, e1) = toy_reset(&cfg, &goals, 42);
        let (s2, e2) = toy_reset(&cfg, &goals, 42);
        assert_eq!(s1, s2);
        assert_eq!(e1, e2);
        assert!((-1.0..=1.0).contains(&s1.s));
        assert_eq!(e1.reward, 0.0);
        assert!(!e1.done);
        assert_eq!(e1.observation, vec![s1.observation(&goals)]);
    }

    #[test]
    fn state_saturates() {
        let (cfg, goals) = fixture();
        let (next, _) = toy_step(
            ToyState {
                s: 0.5,
                t: 0,
                phase: 0.0,
            },
            0.7,
            &cfg,
            &goals,
        );
        assert_eq!(next.s, 1.0);
        let (next, _) = toy_step(
            ToyState {
                s: -0.5,
                t: 0,
                phase: 0.0,
            },
            -3.0,
            &cfg,
            &goals,
        );
        assert_eq!(next.s, -1.0);
    }

    #[test]
    fn reward_is_negative_distance_to_next_goal() {
        let (cfg, goals) = fixture();
        let state = ToyState {
            s: 0.1,
            t: 4,
            phase: 50.0,
        };
        let (next, step) = toy_step(state, 0.4, &cfg, &goals);
        let g_next = goals.at(50.0 + 5.0);
        assert_eq!(next.s, 0.5);
        assert_eq!(step.reward, -(g_next - 0.5).abs());
        assert_eq!(step.observation, vec![g_next - 0.5]);
    }

    #[test]
    fn standing_on_the_next_goal_earns_zero() {
        let (cfg, goals) = fixture();
        let phase = 77.0;
        let g_next = goals.at(phase + 1.0);
        let (_, step) = toy_step(ToyState { s: g_next, t: 0, phase }, 0.0, &cfg, &goals);
        assert_eq!(step.reward, 0.0);
    }

    #[test]
    fn episode_ends_at_length() {
        let (cfg, _) = fixture();
        let mut env = ToyTrack::new(cfg.clone());
        env.reset(3);
        for k in 1..=cfg.episode_length {
            let step = env.step(&[0.0]);
            assert_eq!(step.t, k);
            assert_eq!(step.done, k == cfg.episode_length);
        }
    }

    #[test]
    fn ideal_policy_lags_by_goal_increment() {
        let (cfg, goals) = fixture();
        let mut env = ToyTrack::new(cfg.clone());
        let mut obs = env.reset(9).observation;
        for _ in 0..cfg.episode_length {
            let before = env.state();
            let g_now = before.goal(&goals);
            let step = env.step(&obs);
            let g_next = env.state().goal(&goals);
            if obs[0].abs() > cfg.action_bound {
                // First move from a far-away start saturates the action.
                obs = step.observation;
                continue;
            }
            // s + (g - s) reproduces g up to one rounding.
            assert!((env.state().s - g_now).abs() <= 4.0 * f64::EPSILON);
            assert!((step.reward + (g_next - g_now).abs()).abs() <= 4.0 * f64::EPSILON);
            obs = step.observation;
        }
    }
}
