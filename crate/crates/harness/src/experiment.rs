//! End-to-end orchestration: baseline, symmetric search, asymmetric search,
//! with every architecture recorded in a resumable ledger.

use std::cell::RefCell;
use std::fs;
use std::path::Path;

use minactor_core::algos::{Algo, ArchPair};
use minactor_core::envs::EnvKind;
use minactor_core::search::{run_search, ArchEval, ArchEvaluator, CachedEvaluator, Ledger, SearchPlan, SearchResult};

use crate::config::ExperimentConfig;
use crate::error::{from_json, Error, Result};
use crate::record::{algo_dir, write_atomic};
use crate::report::{emit_report, ReportFormat};
use crate::runner::{DiskEvaluator, Trainer};

pub const LEDGER_JSON: &str = "ledger.json";
pub const SEARCH_JSON: &str = "search.json";
pub const EXPERIMENT_JSON: &str = "experiment.json";
pub const REPORT_MD: &str = "report.md";
pub const REPORT_CSV: &str = "report.csv";

pub fn load_ledger(path: &Path) -> Result<Ledger> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    from_json(&text, &path.display().to_string())
}

fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_string_pretty(value).expect("serializable"))
}

fn plan(config: &ExperimentConfig, algo: Algo) -> Result<SearchPlan> {
    Ok(SearchPlan {
        algo,
        env: config.env,
        ladder: config.ladder(),
        spec: config.threshold_spec(algo)?,
        run_baseline: config.baseline,
        audit: config.audit,
    })
}

/// Called after every freshly trained architecture.
pub type Progress<'a> = dyn Fn(Algo, &ArchEval) + Sync + 'a;

/// Runs the full pipeline for every configured algorithm and writes the
/// run artifacts, ledgers, per-algorithm results and a report under
/// `<out>/<env>/`. With `resume`, architectures already in an algorithm's
/// ledger are taken from it instead of being retrained.
pub fn run_experiment<T: Trainer + ?Sized>(
    config: &ExperimentConfig,
    trainer: &T,
    resume: bool,
    progress: Option<&Progress<'_>>,
) -> Result<Vec<SearchResult>> {
    config.validate()?;
    let out = config.out_dir();
    let env_dir = out.join(config.env.name());
    fs::create_dir_all(&env_dir).map_err(Error::io(&env_dir))?;
    save_json(&env_dir.join(EXPERIMENT_JSON), config)?;

    let mut results = Vec::with_capacity(config.algos.len());
    for &algo in &config.algos {
        let dir = algo_dir(&out, config.env, algo);
        fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let ledger_path = dir.join(LEDGER_JSON);
        let ledger = if resume && ledger_path.exists() {
            load_ledger(&ledger_path)?
        } else {
            Ledger::default()
        };

        let report_progress = |e: &ArchEval| {
            if let Some(p) = progress {
                p(algo, e);
            }
        };
        let evaluator = DiskEvaluator {
            trainer,
            out: out.clone(),
            env: config.env,
            base: config.agent_config(algo)?,
            seeds: config.seeds.clone(),
            spec: config.threshold_spec(algo)?,
            parallelism: config.parallelism(),
            progress: Some(&report_progress),
        };
        // The ledger is rewritten after every fresh architecture so an
        // interrupted experiment loses at most the one in flight.
        let flush_error = RefCell::new(None);
        let mut cached = CachedEvaluator::new(evaluator, ledger).on_record(|l| {
            if let Err(e) = save_json(&ledger_path, l) {
                flush_error.borrow_mut().get_or_insert(e);
            }
        });
        let mut result = run_search(&plan(config, algo)?, &mut cached)?;
        let (_, ledger) = cached.into_parts();
        if let Some(e) = flush_error.into_inner() {
            return Err(e);
        }
        save_json(&ledger_path, &ledger)?;
        result.ledger = ledger.entries;
        save_json(&dir.join(SEARCH_JSON), &result)?;
        results.push(result);
    }

    write_atomic(&env_dir.join(REPORT_MD), &emit_report(&results, ReportFormat::Markdown))?;
    write_atomic(&env_dir.join(REPORT_CSV), &emit_report(&results, ReportFormat::Csv))?;
    Ok(results)
}

/// Answers evaluations from a ledger only; a missing architecture is an
/// error rather than a training run.
struct LedgerOnly<'a> {
    ledger: &'a Ledger,
}

impl ArchEvaluator for LedgerOnly<'_> {
    type Error = Error;

    fn evaluate(&mut self, arch: &ArchPair) -> Result<ArchEval> {
        self.ledger.lookup(arch).cloned().ok_or_else(|| {
            Error::Invalid(format!(
                "ledger has no entry for {arch}; run `search` again with --resume to complete it"
            ))
        })
    }
}

/// Rebuilds the search results of a finished experiment from its saved
/// configuration and ledgers, without training.
pub fn replay_experiment(out: &Path, env: EnvKind) -> Result<(ExperimentConfig, Vec<SearchResult>)> {
    let env_dir = out.join(env.name());
    let path = env_dir.join(EXPERIMENT_JSON);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    let config: ExperimentConfig = from_json(&text, &path.display().to_string())?;
    let mut results = Vec::new();
    for &algo in &config.algos {
        let ledger = load_ledger(&algo_dir(out, env, algo).join(LEDGER_JSON))?;
        let mut result = run_search(&plan(&config, algo)?, &mut LedgerOnly { ledger: &ledger })?;
        result.ledger = ledger.entries;
        results.push(result);
    }
    Ok((config, results))
}
