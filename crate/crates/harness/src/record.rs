//! Per-run artifacts: CSV series, the run summary and the actor snapshot.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use minactor_core::algos::{AgentConfig, Algo, ArchPair, BestEval, EpisodeRecord, EvalStats, TrainLog, UpdateRecord};
use minactor_core::envs::EnvKind;
use minactor_core::nn::MlpParams;
use minactor_core::search::SeedResult;
use serde::{Deserialize, Serialize};

use crate::error::{from_json, Error, Result};

pub const EPISODES_CSV: &str = "episodes.csv";
pub const UPDATES_CSV: &str = "updates.csv";
pub const EVAL_CSV: &str = "eval.csv";
pub const SNAPSHOT: &str = "snapshot.json";
pub const RUN_JSON: &str = "run.json";

/// Everything one training run produced. `config`, `env` and `seed` are
/// enough to replay it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub env: EnvKind,
    pub config: AgentConfig,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
    pub gradient_steps: u64,
    pub final_eval: Option<EvalStats>,
    pub best_eval: Option<BestEval>,
    pub diverged: bool,
    pub divergence: Option<String>,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn new(env: EnvKind, config: AgentConfig, log: TrainLog, wall_clock_secs: f64) -> Self {
        Self {
            env,
            config,
            seed: log.seed,
            episodes: log.episodes,
            updates: log.updates,
            gradient_steps: log.gradient_steps,
            final_eval: log.final_eval,
            best_eval: log.best_eval,
            diverged: log.diverged,
            divergence: log.divergence,
            wall_clock_secs,
        }
    }

    pub fn seed_result(&self) -> SeedResult {
        match &self.final_eval {
            Some(e) if !self.diverged => SeedResult::completed(self.seed, e.mean, e.std),
            _ => SeedResult::diverged(self.seed),
        }
    }
}

/// `<out>/<env>/<algo>`: holds the ledger and one directory per architecture.
pub fn algo_dir(out: &Path, env: EnvKind, algo: Algo) -> PathBuf {
    out.join(env.name()).join(algo.name())
}

/// `<out>/<env>/<algo>/a<actor>_c<critic>/seed<k>`.
pub fn run_dir(out: &Path, env: EnvKind, algo: Algo, arch: &ArchPair, seed: u64) -> PathBuf {
    algo_dir(out, env, algo)
        .join(arch.to_string())
        .join(format!("seed{seed}"))
}

/// Shortest round-trip decimal form, so equal values give equal bytes.
fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(header).map_err(Error::csv(path))?;
    for row in rows {
        w.write_record(&row).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn write_episodes_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let seed = record.seed.to_string();
    write_rows(
        path,
        &["seed", "episode", "step", "ep_return"],
        record.episodes.iter().map(|e| {
            vec![
                seed.clone(),
                e.episode.to_string(),
                e.step.to_string(),
                num(e.ep_return),
            ]
        }),
    )
}

pub fn write_updates_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let seed = record.seed.to_string();
    write_rows(
        path,
        &["seed", "step", "q_loss", "pi_loss", "alpha"],
        record.updates.iter().map(|u| {
            vec![
                seed.clone(),
                u.step.to_string(),
                num(u.q_loss),
                opt(u.pi_loss),
                opt(u.alpha),
            ]
        }),
    )
}

/// Per-episode returns of the final evaluation (header only if diverged).
pub fn write_eval_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let seed = record.seed.to_string();
    let returns = record.final_eval.as_ref().map_or(&[][..], |e| &e.per_episode[..]);
    write_rows(
        path,
        &["seed", "episode", "return"],
        returns
            .iter()
            .enumerate()
            .map(|(i, r)| vec![seed.clone(), i.to_string(), num(*r)]),
    )
}

/// Trained actor plus what is needed to rebuild and evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub env: EnvKind,
    pub seed: u64,
    pub config: AgentConfig,
    /// Layer dimensions, activations, then weights (row-major, output by
    /// input) and biases per layer, input side first.
    pub actor: MlpParams,
}

impl Snapshot {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let raw: Snapshot = from_json(&text, &path.display().to_string())?;
        // Re-validate shapes; a hand-edited file must not slip through.
        let actor = MlpParams::from_layers(raw.actor.spec().clone(), raw.actor.layers().to_vec())?;
        Ok(Self { actor, ..raw })
    }
}

/// Writes `text` through a temporary file so readers never see a partial
/// document.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(Error::io(&tmp))?;
    f.write_all(text.as_bytes()).map_err(Error::io(&tmp))?;
    f.sync_all().map_err(Error::io(&tmp))?;
    fs::rename(&tmp, path).map_err(Error::io(path))
}

/// Writes the three CSV files, `run.json` and the snapshot into `dir`.
pub fn write_run(dir: &Path, record: &RunRecord, actor: &MlpParams) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_episodes_csv(record, &dir.join(EPISODES_CSV))?;
    write_updates_csv(record, &dir.join(UPDATES_CSV))?;
    write_eval_csv(record, &dir.join(EVAL_CSV))?;
    let snapshot = Snapshot {
        env: record.env,
        seed: record.seed,
        config: record.config.clone(),
        actor: actor.clone(),
    };
    write_atomic(
        &dir.join(SNAPSHOT),
        &serde_json::to_string(&snapshot).expect("snapshot serializes"),
    )?;
    write_atomic(
        &dir.join(RUN_JSON),
        &serde_json::to_string_pretty(record).expect("record serializes"),
    )
}
