//! Training backends and the parallel seed runner.

use std::path::PathBuf;
use std::time::Instant;

use minactor_core::algos::{train_run, AgentConfig, Algo, ArchPair, TrainLog};
use minactor_core::envs::EnvKind;
use minactor_core::nn::MlpParams;
use minactor_core::search::{ArchEval, ArchEvaluator, ThresholdSpec};

use crate::error::{Error, Result};
use crate::record::{run_dir, write_run, RunRecord};

/// Produces a training log and final actor for one `(config, seed)`.
/// Swappable so orchestration can be tested without training.
pub trait Trainer: Sync {
    fn train(&self, env: EnvKind, config: &AgentConfig, seed: u64) -> Result<(TrainLog, MlpParams)>;
}

/// Trains in-process with the core learners.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalTrainer;

impl Trainer for LocalTrainer {
    fn train(&self, env: EnvKind, config: &AgentConfig, seed: u64) -> Result<(TrainLog, MlpParams)> {
        let (log, agent) = train_run(env, config, seed)?;
        Ok((log, agent.actor().clone()))
    }
}

/// Trains every seed, `parallelism` at a time, seeds dealt round-robin to
/// workers. Results come back in seed-list order.
pub fn run_seeds<T: Trainer + ?Sized>(
    trainer: &T,
    env: EnvKind,
    config: &AgentConfig,
    seeds: &[u64],
    parallelism: usize,
) -> Result<Vec<(RunRecord, MlpParams)>> {
    let workers = parallelism.clamp(1, seeds.len().max(1));
    let run_one = |seed: u64| -> Result<(RunRecord, MlpParams)> {
        let start = Instant::now();
        let (log, actor) = trainer.train(env, config, seed)?;
        let record = RunRecord::new(env, config.clone(), log, start.elapsed().as_secs_f64());
        Ok((record, actor))
    };

    let mut slots: Vec<Option<Result<(RunRecord, MlpParams)>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let run_one = &run_one;
                scope.spawn(move || {
                    (w..seeds.len())
                        .step_by(workers)
                        .map(|i| (i, run_one(seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("training worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every seed ran")).collect()
}

/// Evaluates architectures by training all seeds and writing each run's
/// artifacts under the output directory.
pub struct DiskEvaluator<'a, T: ?Sized> {
    pub trainer: &'a T,
    pub out: PathBuf,
    pub env: EnvKind,
    pub base: AgentConfig,
    pub seeds: Vec<u64>,
    pub spec: ThresholdSpec,
    pub parallelism: usize,
    /// Called after each architecture with its evaluation.
    pub progress: Option<&'a (dyn Fn(&ArchEval) + Sync)>,
}

impl<T: Trainer + ?Sized> DiskEvaluator<'_, T> {
    fn algo(&self) -> Algo {
        self.base.algo
    }
}

impl<T: Trainer + ?Sized> ArchEvaluator for DiskEvaluator<'_, T> {
    type Error = Error;

    fn evaluate(&mut self, arch: &ArchPair) -> Result<ArchEval> {
        let config = self.base.clone().with_arch(arch.clone());
        let runs = run_seeds(self.trainer, self.env, &config, &self.seeds, self.parallelism)?;
        let mut seeds = Vec::with_capacity(runs.len());
        for (record, actor) in &runs {
            write_run(
                &run_dir(&self.out, self.env, self.algo(), arch, record.seed),
                record,
                actor,
            )?;
            seeds.push(record.seed_result());
        }
        let eval = ArchEval::from_seeds(arch.clone(), seeds, &self.spec);
        if let Some(p) = self.progress {
            p(&eval);
        }
        Ok(eval)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use minactor_core::algos::EvalStats;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Returns the seed as the evaluation score without training.
    struct Echo {
        calls: AtomicUsize,
    }

    impl Trainer for Echo {
        fn train(&self, env: EnvKind, config: &AgentConfig, seed: u64) -> Result<(TrainLog, MlpParams)> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let agent = minactor_core::algos::make_agent(env, config, seed)?;
            let log = TrainLog {
                seed,
                episodes: Vec::new(),
                updates: Vec::new(),
                gradient_steps: 0,
                final_eval: Some(EvalStats::from_returns(vec![seed as f64])),
                best_eval: None,
                diverged: false,
                divergence: None,
            };
            Ok((log, agent.actor().clone()))
        }
    }

    #[test]
    fn results_keep_seed_order_under_any_parallelism() {
        let config = AgentConfig::defaults(Algo::Ddpg, EnvKind::Toy);
        let seeds = [9, 3, 7, 1, 5];
        for p in 1..=6 {
            let t = Echo {
                calls: AtomicUsize::new(0),
            };
            let runs = run_seeds(&t, EnvKind::Toy, &config, &seeds, p).unwrap();
            let got: Vec<u64> = runs.iter().map(|(r, _)| r.seed).collect();
            assert_eq!(got, seeds);
            assert_eq!(t.calls.load(Ordering::SeqCst), seeds.len());
        }
    }

    #[test]
    fn parallel_training_matches_sequential() {
        let mut config = AgentConfig::defaults(Algo::Sac, EnvKind::Toy).with_arch(ArchPair::new(&[], &[4]));
        config.total_steps = 300;
        config.start_steps = 100;
        config.update_after = 100;
        config.batch_size = 16;
        config.eval_episodes = 2;
        let seq = run_seeds(&LocalTrainer, EnvKind::Toy, &config, &[0, 1, 2], 1).unwrap();
        let par = run_seeds(&LocalTrainer, EnvKind::Toy, &config, &[0, 1, 2], 3).unwrap();
        for ((a, x), (b, y)) in seq.iter().zip(&par) {
            assert_eq!(a.episodes, b.episodes);
            assert_eq!(a.updates, b.updates);
            assert_eq!(x, y);
        }
    }
}
