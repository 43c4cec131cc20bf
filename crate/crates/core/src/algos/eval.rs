use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::envs::{Env, EnvKind};
use crate::rng;
use crate::{Error, Result};

/// Anything that maps an observation to an action.
pub trait Policy {
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>>;
}

impl<F> Policy for F
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(self(obs))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    /// Population standard deviation over episodes.
    pub std: f64,
    pub per_episode: Vec<f64>,
}

impl EvalStats {
    pub fn from_returns(per_episode: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&per_episode);
        Self { mean, std, per_episode }
    }
}

/// Mean and population standard deviation; `(NaN, NaN)` for no samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, crate::math::sqrt(var))
}

/// Seed of the `index`-th evaluation episode.
pub fn episode_seed(eval_seed: u64, index: usize) -> u64 {
    rng::derive_seed(eval_seed, index as u64)
}

/// Runs `n_episodes` full episodes of `policy` on fresh instances of `env`,
/// episode `i` seeded by [`episode_seed`]`(seed, i)`.
pub fn evaluate_policy<P: Policy + ?Sized>(
    policy: &mut P,
    env: EnvKind,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let mut instance = env.make();
    let mut returns = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        returns.push(run_episode(policy, instance.as_mut(), episode_seed(seed, i))?);
    }
    Ok(EvalStats::from_returns(returns))
}

/// Undiscounted return of one episode.
pub fn run_episode<P: Policy + ?Sized>(policy: &mut P, env: &mut dyn Env, episode_seed: u64) -> Result<f64> {
    let mut step = env.reset(episode_seed);
    let mut total = 0.0;
    while !step.done {
        let action = policy.act(&step.observation)?;
        step = env.step(&action);
        total += step.reward;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{GoalSignal, ToyConfig};
    use alloc::vec;

    #[test]
    fn ideal_toy_policy_return_is_sum_of_goal_increments() {
        let cfg = ToyConfig::default();
        let goals = GoalSignal::new(&cfg);
        let mut ideal = |o: &[f64]| vec![o[0]];
        let stats = evaluate_policy(&mut ideal, EnvKind::Toy, 4, 77).unwrap();
        for (i, ret) in stats.per_episode.iter().enumerate() {
            // Replay the episode by hand: after the first move the state sits
            // on the previous goal, so each reward is minus the goal increment.
            let mut env = crate::envs::ToyTrack::new(cfg.clone());
            let first = env.reset(episode_seed(77, i));
            let st = env.state();
            let mut expected = 0.0;
            let s1 = (st.s + first.observation[0].clamp(-1.0, 1.0)).clamp(-1.0, 1.0);
            expected -= (goals.at(st.phase + 1.0) - s1).abs();
            for t in 1..cfg.episode_length {
                let g_now = goals.at(st.phase + t as f64);
                let g_next = goals.at(st.phase + t as f64 + 1.0);
                expected -= (g_next - g_now).abs();
            }
            assert!((ret - expected).abs() < 1e-12, "episode {i}: {ret} vs {expected}");
        }
    }

    #[test]
    fn single_episode_has_zero_spread() {
        let mut zero = |_: &[f64]| vec![0.0];
        let stats = evaluate_policy(&mut zero, EnvKind::Pendulum, 1, 3).unwrap();
        assert_eq!(stats.std, 0.0);
        assert_eq!(stats.per_episode.len(), 1);
    }

    #[test]
    fn evaluation_is_seeded() {
        let mut p = |o: &[f64]| vec![-2.0 * o[1] - 0.5 * o[2]];
        let a = evaluate_policy(&mut p, EnvKind::Pendulum, 3, 11).unwrap();
        let b = evaluate_policy(&mut p, EnvKind::Pendulum, 3, 11).unwrap();
        assert_eq!(a, b);
        assert!(evaluate_policy(&mut p, EnvKind::Pendulum, 0, 11).is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
