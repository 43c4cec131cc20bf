//! Two-phase minimal-architecture search.
//!
//! 1. Binary-search the ladder for the smallest symmetric architecture
//!    (actor and critic share a rung) whose seed-averaged return clears the
//!    threshold.
//! 2. Lock the critic to that rung and binary-search the actor over the
//!    rungs at or below it.
//!
//! Every evaluated architecture is kept in a [`Ledger`] so repeated points
//! are never retrained and a run can be resumed or audited.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::algos::{mean_std, train_run, AgentConfig, Algo, ArchPair};
use crate::envs::EnvKind;
use crate::nn::param_count;
use crate::{Error, Result};

/// Ordered candidate hidden-layer configurations, smallest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ladder {
    rungs: Vec<Vec<usize>>,
}

impl Default for Ladder {
    fn default() -> Self {
        Self {
            rungs: vec![
                vec![1, 1],
                vec![4, 4],
                vec![8, 8],
                vec![16, 16],
                vec![32, 32],
                vec![64, 64],
                vec![128, 128],
                vec![256, 256],
                vec![400, 300],
            ],
        }
    }
}

impl Ladder {
    pub fn new(rungs: Vec<Vec<usize>>) -> Result<Self> {
        if rungs.is_empty() {
            return Err(Error::InvalidConfig("ladder needs at least one rung".into()));
        }
        Ok(Self { rungs })
    }

    /// Checks that parameter counts strictly increase for the given network
    /// input and output sizes.
    pub fn validate_for(&self, in_dim: usize, out_dim: usize) -> Result<()> {
        let mut prev = 0;
        for rung in &self.rungs {
            let count = param_count(in_dim, rung, out_dim)?;
            if count <= prev {
                return Err(Error::InvalidConfig(format!(
                    "ladder rung {rung:?} ({count} parameters) is not larger than the previous rung ({prev})"
                )));
            }
            prev = count;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn rung(&self, i: usize) -> &[usize] {
        &self.rungs[i]
    }

    pub fn rungs(&self) -> &[Vec<usize>] {
        &self.rungs
    }

    pub fn position(&self, hidden: &[usize]) -> Option<usize> {
        self.rungs.iter().position(|r| r == hidden)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub threshold: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_fraction: f64,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
}

fn default_tolerance() -> f64 {
    0.10
}

fn default_seeds() -> usize {
    6
}

impl ThresholdSpec {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            tolerance_fraction: default_tolerance(),
            n_seeds: default_seeds(),
        }
    }

    /// Lowest mean return that still passes.
    pub fn lower_bound(&self) -> f64 {
        self.threshold - self.tolerance_fraction * self.threshold.abs()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidConfig("threshold must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.tolerance_fraction) {
            return Err(Error::InvalidConfig("tolerance_fraction must lie in [0, 1)".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be positive".into()));
        }
        Ok(())
    }
}

/// `mean >= threshold - tolerance * |threshold|`, inclusive.
pub fn passes_threshold(mean_reward: f64, spec: &ThresholdSpec) -> bool {
    mean_reward >= spec.lower_bound()
}

/// Outcome of one training seed at one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Final evaluation mean; `None` when the run diverged.
    pub eval_mean: Option<f64>,
    pub eval_std: Option<f64>,
}

impl SeedResult {
    pub fn completed(seed: u64, mean: f64, std: f64) -> Self {
        Self {
            seed,
            eval_mean: Some(mean),
            eval_std: Some(std),
        }
    }

    pub fn diverged(seed: u64) -> Self {
        Self {
            seed,
            eval_mean: None,
            eval_std: None,
        }
    }
}

/// Seed-aggregated evaluation of one architecture pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchEval {
    pub arch: ArchPair,
    pub seeds: Vec<SeedResult>,
    /// Mean and spread of the per-seed evaluation means over completed seeds.
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub pass: bool,
}

impl ArchEval {
    /// Aggregates per-seed results. A diverged seed counts as a failure of
    /// the whole architecture; statistics cover the completed seeds.
    pub fn from_seeds(arch: ArchPair, seeds: Vec<SeedResult>, spec: &ThresholdSpec) -> Self {
        let completed: Vec<f64> = seeds.iter().filter_map(|s| s.eval_mean).collect();
        let (mean, std) = if completed.is_empty() {
            (None, None)
        } else {
            let (m, s) = mean_std(&completed);
            (Some(m), Some(s))
        };
        let all_completed = !seeds.is_empty() && completed.len() == seeds.len();
        let pass = all_completed && mean.is_some_and(|m| passes_threshold(m, spec));
        Self {
            arch,
            seeds,
            mean,
            std,
            pass,
        }
    }
}

/// Evaluates an architecture over a seed set. The error type lets callers
/// that do I/O report their own failures through the search.
pub trait ArchEvaluator {
    type Error: From<Error>;

    fn evaluate(&mut self, arch: &ArchPair) -> Result<ArchEval, Self::Error>;
}

/// Runs `run` once per seed, in order, and aggregates.
pub fn run_arch_eval<F, E>(arch: &ArchPair, spec: &ThresholdSpec, seeds: &[u64], mut run: F) -> Result<ArchEval, E>
where
    F: FnMut(&ArchPair, u64) -> Result<SeedResult, E>,
{
    let results = seeds.iter().map(|&s| run(arch, s)).collect::<Result<Vec<_>, E>>()?;
    Ok(ArchEval::from_seeds(arch.clone(), results, spec))
}

/// Trains every seed in-process, one after another.
#[derive(Debug, Clone)]
pub struct SequentialEvaluator {
    pub env: EnvKind,
    pub base: AgentConfig,
    pub seeds: Vec<u64>,
    pub spec: ThresholdSpec,
}

impl ArchEvaluator for SequentialEvaluator {
    type Error = Error;

    fn evaluate(&mut self, arch: &ArchPair) -> Result<ArchEval> {
        let base = &self.base;
        let env = self.env;
        run_arch_eval(arch, &self.spec, &self.seeds, |arch, seed| {
            let config = base.clone().with_arch(arch.clone());
            let (log, _) = train_run(env, &config, seed)?;
            Ok(match log.final_eval {
                Some(e) => SeedResult::completed(seed, e.mean, e.std),
                None => SeedResult::diverged(seed),
            })
        })
    }
}

/// Every architecture evaluated so far, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ledger {
    pub entries: Vec<ArchEval>,
}

impl Ledger {
    pub fn lookup(&self, arch: &ArchPair) -> Option<&ArchEval> {
        self.entries.iter().find(|e| &e.arch == arch)
    }
}

type RecordHook<'a> = Box<dyn FnMut(&Ledger) + 'a>;

/// Memoizes an evaluator through a [`Ledger`]; `on_record` fires after each
/// fresh evaluation (used to persist progress).
pub struct CachedEvaluator<'a, E> {
    inner: E,
    ledger: Ledger,
    on_record: Option<RecordHook<'a>>,
    fresh: usize,
}

impl<'a, E: ArchEvaluator> CachedEvaluator<'a, E> {
    pub fn new(inner: E, ledger: Ledger) -> Self {
        Self {
            inner,
            ledger,
            on_record: None,
            fresh: 0,
        }
    }

    pub fn on_record(mut self, hook: impl FnMut(&Ledger) + 'a) -> Self {
        self.on_record = Some(Box::new(hook));
        self
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    /// Evaluations actually run (cache misses).
    pub fn fresh_evaluations(&self) -> usize {
        self.fresh
    }

    pub fn into_parts(self) -> (E, Ledger) {
        (self.inner, self.ledger)
    }
}

impl<E: ArchEvaluator> ArchEvaluator for CachedEvaluator<'_, E> {
    type Error = E::Error;

    fn evaluate(&mut self, arch: &ArchPair) -> Result<ArchEval, E::Error> {
        if let Some(hit) = self.ledger.lookup(arch) {
            return Ok(hit.clone());
        }
        let result = self.inner.evaluate(arch)?;
        self.ledger.entries.push(result.clone());
        self.fresh += 1;
        if let Some(hook) = self.on_record.as_mut() {
            hook(&self.ledger);
        }
        Ok(result)
    }
}

/// Smallest index in `0..len` whose evaluation passes, assuming outcomes
/// are monotone (fail...fail pass...pass). Uses at most
/// `ceil(log2(len + 1))` evaluations; `None` when nothing passes.
pub fn binary_search_min<F, E>(len: usize, mut passes: F) -> Result<Option<usize>, E>
where
    F: FnMut(usize) -> Result<bool, E>,
{
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok((lo < len).then_some(lo))
}

/// First passing index by exhaustive scan; the reference the binary search
/// is audited against.
pub fn linear_scan_min<F, E>(len: usize, mut passes: F) -> Result<Option<usize>, E>
where
    F: FnMut(usize) -> Result<bool, E>,
{
    for i in 0..len {
        if passes(i)? {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// A ladder rung together with its evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungResult {
    pub index: usize,
    pub eval: ArchEval,
}

pub fn search_symmetric<V: ArchEvaluator + ?Sized>(
    ladder: &Ladder,
    evaluator: &mut V,
) -> Result<Option<RungResult>, V::Error> {
    let mut evals: Vec<Option<ArchEval>> = vec![None; ladder.len()];
    let found = binary_search_min::<_, V::Error>(ladder.len(), |i| {
        let e = evaluator.evaluate(&ArchPair::symmetric(ladder.rung(i)))?;
        let pass = e.pass;
        evals[i] = Some(e);
        Ok(pass)
    })?;
    Ok(found.map(|index| RungResult {
        index,
        eval: evals[index].take().expect("found rung was evaluated"),
    }))
}

/// Searches actor rungs `0..=symmetric_index` with the critic fixed. Falls
/// back to the symmetric rung when no smaller actor passes.
pub fn search_asymmetric<V: ArchEvaluator + ?Sized>(
    ladder: &Ladder,
    symmetric_index: usize,
    locked_critic: &[usize],
    evaluator: &mut V,
) -> Result<RungResult, V::Error> {
    if symmetric_index >= ladder.len() {
        return Err(Error::InvalidConfig(format!(
            "symmetric rung {symmetric_index} is outside a ladder of {} rungs",
            ladder.len()
        ))
        .into());
    }
    let mut evals: Vec<Option<ArchEval>> = vec![None; symmetric_index];
    let found = binary_search_min::<_, V::Error>(symmetric_index, |i| {
        let e = evaluator.evaluate(&ArchPair::new(ladder.rung(i), locked_critic))?;
        let pass = e.pass;
        evals[i] = Some(e);
        Ok(pass)
    })?;
    match found {
        Some(index) => Ok(RungResult {
            index,
            eval: evals[index].take().expect("found rung was evaluated"),
        }),
        None => Ok(RungResult {
            index: symmetric_index,
            eval: evaluator.evaluate(&ArchPair::new(ladder.rung(symmetric_index), locked_critic))?,
        }),
    }
}

/// `(1 - asym / sym) * 100`.
pub fn reduction_percent(sym_actor_params: usize, asym_actor_params: usize) -> f64 {
    (1.0 - asym_actor_params as f64 / sym_actor_params as f64) * 100.0
}

/// Result of re-checking a binary-search answer by linear scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub symmetric_linear: Option<usize>,
    pub asymmetric_linear: Option<usize>,
    /// Whether both scans agree with the binary search.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub algo: Algo,
    pub env: EnvKind,
    pub spec: ThresholdSpec,
    pub baseline: Option<ArchEval>,
    pub smallest_symmetric: Option<RungResult>,
    pub smallest_asymmetric: Option<RungResult>,
    /// Actor weight reduction of the asymmetric over the symmetric actor.
    pub reduction_percent: Option<f64>,
    pub audit: Option<Audit>,
    pub ledger: Vec<ArchEval>,
}

/// Options for [`run_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchPlan {
    pub algo: Algo,
    pub env: EnvKind,
    pub ladder: Ladder,
    pub spec: ThresholdSpec,
    pub run_baseline: bool,
    pub audit: bool,
}

/// Baseline, then the symmetric phase, then the asymmetric phase.
///
/// The returned `ledger` is empty; callers that evaluate through a
/// [`CachedEvaluator`] fill it from the cache.
pub fn run_search<V: ArchEvaluator + ?Sized>(plan: &SearchPlan, evaluator: &mut V) -> Result<SearchResult, V::Error> {
    let (in_dim, out_dim) = (plan.env.obs_dim(), plan.env.act_dim());
    plan.ladder.validate_for(in_dim, out_dim)?;
    plan.spec.validate()?;

    let baseline = if plan.run_baseline {
        Some(evaluator.evaluate(&ArchPair::symmetric(&plan.algo.baseline_hidden()))?)
    } else {
        None
    };

    let symmetric = search_symmetric(&plan.ladder, evaluator)?;
    let asymmetric = match &symmetric {
        Some(sym) => Some(search_asymmetric(
            &plan.ladder,
            sym.index,
            plan.ladder.rung(sym.index),
            evaluator,
        )?),
        None => None,
    };

    let reduction = match (&symmetric, &asymmetric) {
        (Some(s), Some(a)) => Some(reduction_percent(
            param_count(in_dim, &s.eval.arch.actor_hidden, out_dim)?,
            param_count(in_dim, &a.eval.arch.actor_hidden, out_dim)?,
        )),
        _ => None,
    };

    let audit = if plan.audit {
        let symmetric_linear = linear_scan_min::<_, V::Error>(plan.ladder.len(), |i| {
            Ok(evaluator.evaluate(&ArchPair::symmetric(plan.ladder.rung(i)))?.pass)
        })?;
        let asymmetric_linear = match &symmetric {
            Some(sym) => {
                let critic = plan.ladder.rung(sym.index);
                linear_scan_min::<_, V::Error>(sym.index + 1, |i| {
                    Ok(evaluator.evaluate(&ArchPair::new(plan.ladder.rung(i), critic))?.pass)
                })?
            }
            None => None,
        };
        let consistent = symmetric_linear == symmetric.as_ref().map(|s| s.index)
            && asymmetric_linear == asymmetric.as_ref().map(|a| a.index);
        Some(Audit {
            symmetric_linear,
            asymmetric_linear,
            consistent,
        })
    } else {
        None
    };

    Ok(SearchResult {
        algo: plan.algo,
        env: plan.env,
        spec: plan.spec,
        baseline,
        smallest_symmetric: symmetric,
        smallest_asymmetric: asymmetric,
        reduction_percent: reduction,
        audit,
        ledger: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn spec(threshold: f64) -> ThresholdSpec {
        ThresholdSpec::new(threshold)
    }

    #[test]
    fn threshold_tolerance() {
        assert!(passes_threshold(-170.0, &spec(-160.0)));
        assert!(!passes_threshold(-180.0, &spec(-160.0)));
        assert!(passes_threshold(-176.0, &spec(-160.0)));
        let exact = ThresholdSpec {
            tolerance_fraction: 0.0,
            ..spec(-160.0)
        };
        assert!(passes_threshold(-160.0, &exact));
        assert!(!passes_threshold(f64::NAN, &exact));
        // Positive thresholds get the same relative slack below.
        assert!(passes_threshold(0.81, &spec(0.90)));
    }

    #[test]
    fn default_ladder_is_increasing_for_pendulum() {
        let ladder = Ladder::default();
        assert_eq!(ladder.len(), 9);
        ladder.validate_for(3, 1).unwrap();
        let bad = Ladder::new(vec![vec![8, 8], vec![4, 4]]).unwrap();
        assert!(bad.validate_for(3, 1).is_err());
    }

    fn pattern(p: &[bool]) -> impl FnMut(usize) -> Result<bool> + '_ {
        move |i| Ok(p[i])
    }

    #[test]
    fn binary_search_examples() {
        let (f, t) = (false, true);
        assert_eq!(
            binary_search_min(9, pattern(&[f, f, f, t, t, t, t, t, t])).unwrap(),
            Some(3)
        );
        assert_eq!(binary_search_min(9, pattern(&[t; 9])).unwrap(), Some(0));
        assert_eq!(binary_search_min(9, pattern(&[f; 9])).unwrap(), None);
        assert_eq!(binary_search_min(0, pattern(&[])).unwrap(), None);
    }

    #[test]
    fn binary_search_evaluation_budget() {
        for len in 1..=16usize {
            let bound = (usize::BITS - len.leading_zeros()) as usize; // ceil(log2(len + 1))
            for first in 0..=len {
                let mut calls = 0;
                let got = binary_search_min(len, |i| {
                    calls += 1;
                    Ok::<_, Error>(i >= first)
                })
                .unwrap();
                assert_eq!(got, (first < len).then_some(first));
                assert!(calls <= bound, "len {len} first {first}: {calls} calls");
            }
        }
    }

    #[test]
    fn reductions() {
        assert!((reduction_percent(353, 41) - 88.385).abs() < 1e-3);
        assert_eq!(reduction_percent(353, 353), 0.0);
        assert!((reduction_percent(353, 113) - 67.99).abs() < 5e-3);
    }

    #[test]
    fn divergence_fails_the_architecture() {
        let arch = ArchPair::symmetric(&[4, 4]);
        let all_diverged =
            ArchEval::from_seeds(arch.clone(), (0..6).map(SeedResult::diverged).collect(), &spec(-160.0));
        assert!(!all_diverged.pass);
        assert_eq!(all_diverged.mean, None);

        let mut seeds: Vec<SeedResult> = (0..5).map(|s| SeedResult::completed(s, -100.0, 1.0)).collect();
        seeds.push(SeedResult::diverged(5));
        let one_bad = ArchEval::from_seeds(arch, seeds, &spec(-160.0));
        assert_eq!(one_bad.mean, Some(-100.0));
        assert!(!one_bad.pass);
    }

    struct Stub {
        calls: usize,
        value: fn(&ArchPair) -> f64,
    }

    impl ArchEvaluator for Stub {
        type Error = Error;

        fn evaluate(&mut self, arch: &ArchPair) -> Result<ArchEval> {
            self.calls += 1;
            let s = spec(-160.0);
            run_arch_eval(arch, &s, &[0, 1, 2, 3, 4, 5], |a, seed| {
                Ok(SeedResult::completed(seed, (self.value)(a), 0.0))
            })
        }
    }

    #[test]
    fn constant_stub_passes() {
        let mut stub = Stub {
            calls: 0,
            value: |_| -150.0,
        };
        let e = stub.evaluate(&ArchPair::symmetric(&[1, 1])).unwrap();
        assert!(e.pass);
        assert_eq!(e.mean, Some(-150.0));
        assert_eq!(e.seeds.len(), 6);
    }

    #[test]
    fn all_pass_stub_gives_smallest_rung() {
        let ladder = Ladder::default();
        let mut stub = CachedEvaluator::new(
            Stub {
                calls: 0,
                value: |_| -150.0,
            },
            Ledger::default(),
        );
        let sym = search_symmetric(&ladder, &mut stub).unwrap().unwrap();
        assert_eq!(sym.index, 0);
        assert_eq!(ladder.rung(sym.index), &[1, 1]);
        assert!(stub.ledger().entries.len() <= 4);
    }

    fn width(h: &[usize]) -> usize {
        h.iter().sum()
    }

    #[test]
    fn two_phase_search_with_critic_limited_stub() {
        // Passes when the critic has at least 16x16 and the actor at least 4x4.
        let value = |a: &ArchPair| {
            if width(&a.critic_hidden) >= 32 && width(&a.actor_hidden) >= 8 {
                -150.0
            } else {
                -400.0
            }
        };
        let plan = SearchPlan {
            algo: Algo::Ddpg,
            env: EnvKind::Pendulum,
            ladder: Ladder::default(),
            spec: spec(-160.0),
            run_baseline: true,
            audit: true,
        };
        let mut ev = CachedEvaluator::new(Stub { calls: 0, value }, Ledger::default());
        let r = run_search(&plan, &mut ev).unwrap();
        assert_eq!(
            r.smallest_symmetric.as_ref().unwrap().eval.arch,
            ArchPair::symmetric(&[16, 16])
        );
        assert_eq!(
            r.smallest_asymmetric.as_ref().unwrap().eval.arch,
            ArchPair::new(&[4, 4], &[16, 16])
        );
        assert!((r.reduction_percent.unwrap() - 88.38).abs() < 0.01);
        assert!(r.audit.unwrap().consistent);
        assert!(r.baseline.unwrap().pass);
        // Cached evaluations are never repeated.
        let (inner, ledger) = ev.into_parts();
        assert_eq!(inner.calls, ledger.entries.len());
    }

    #[test]
    fn asymmetric_falls_back_to_symmetric_rung() {
        let value = |a: &ArchPair| if a.is_symmetric() { -150.0 } else { -400.0 };
        let ladder = Ladder::default();
        let mut ev = CachedEvaluator::new(Stub { calls: 0, value }, Ledger::default());
        let r = search_asymmetric(&ladder, 3, &[16, 16], &mut ev).unwrap();
        assert_eq!(r.index, 3);
        assert_eq!(r.eval.arch, ArchPair::symmetric(&[16, 16]));
        assert_eq!(reduction_percent(353, 353), 0.0);
    }

    #[test]
    fn cache_hook_sees_every_fresh_evaluation() {
        let mut seen = Vec::new();
        {
            let mut ev = CachedEvaluator::new(
                Stub {
                    calls: 0,
                    value: |_| -150.0,
                },
                Ledger::default(),
            )
            .on_record(|l| seen.push(l.entries.len()));
            let arch = ArchPair::symmetric(&[4, 4]);
            ev.evaluate(&arch).unwrap();
            ev.evaluate(&arch).unwrap();
            ev.evaluate(&ArchPair::symmetric(&[8, 8])).unwrap();
            assert_eq!(ev.fresh_evaluations(), 2);
        }
        assert_eq!(seen, vec![1, 2]);
    }
}
