//! Command-line front end. [`dispatch`] is the whole program minus the
//! process exit, so it can be driven from tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use minactor_core::algos::{eval_seed, evaluate_policy, make_agent, AgentConfig, Algo, ArchPair};
use minactor_core::envs::EnvKind;
use minactor_core::nn::param_count;
use minactor_core::search::Ladder;

use crate::config::{default_out_dir, load_config};
use crate::error::{Error, Result};
use crate::experiment::{replay_experiment, run_experiment};
use crate::record::{run_dir, write_run, RunRecord, Snapshot};
use crate::report::{emit_report, size_label, ReportFormat};
use crate::runner::{run_seeds, LocalTrainer};

#[derive(Debug, Parser)]
#[command(
    name = "minactor",
    version,
    about = "Search for the smallest actor network that still solves a task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Markdown => ReportFormat::Markdown,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one (architecture, seed) run and write its artifacts.
    Train {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        algo: Algo,
        /// Actor hidden sizes, e.g. `16,16`; empty for a single linear layer.
        #[arg(long, value_parser = parse_hidden, default_value = "")]
        actor: Hidden,
        #[arg(long, value_parser = parse_hidden, default_value = "")]
        critic: Hidden,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Environment steps (default depends on the environment).
        #[arg(long)]
        steps: Option<usize>,
        /// Output directory (default: $MINACTOR_OUT, else `runs`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the baseline and both searches described by a JSON config.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Reuse architectures already recorded in the ledgers.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Evaluate a saved actor snapshot deterministically.
    Eval {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        /// Evaluation seed (default: the one used after training).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Actor parameter counts for every ladder rung.
    Params {
        /// Limit the table to one environment.
        #[arg(long)]
        env: Option<EnvKind>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Rebuild the report of a finished search from its ledgers.
    Report {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
}

#[derive(Debug, Clone)]
struct Hidden(Vec<usize>);

fn parse_hidden(s: &str) -> std::result::Result<Hidden, String> {
    let s = s.trim();
    if s.is_empty() || s == "linear" || s == "lin" {
        return Ok(Hidden(Vec::new()));
    }
    s.split(',')
        .map(|w| match w.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("`{w}` is not a positive layer width")),
            Ok(n) => Ok(n),
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Hidden)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 on usage errors, 1 on
/// any other failure.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train {
            env,
            algo,
            actor,
            critic,
            seed,
            steps,
            out: out_dir,
        } => {
            let mut config = AgentConfig::defaults(algo, env).with_arch(ArchPair::new(&actor.0, &critic.0));
            if let Some(s) = steps {
                config.total_steps = s;
            }
            config.validate()?;
            let root = out_dir.unwrap_or_else(default_out_dir);
            let (record, net) = run_seeds(&LocalTrainer, env, &config, &[seed], 1)?.remove(0);
            let dir = run_dir(&root, env, algo, &config.arch, seed);
            write_run(&dir, &record, &net)?;
            writeln!(out, "{}", train_summary(&record)).map_err(io_err)?;
            writeln!(out, "wrote {}", dir.display()).map_err(io_err)
        }
        Command::Search {
            config,
            out: out_dir,
            resume,
            parallelism,
        } => {
            let mut config = load_config(&config)?;
            if out_dir.is_some() {
                config.out_dir = out_dir;
            }
            if parallelism.is_some() {
                config.parallelism = parallelism;
            }
            let log = std::sync::Mutex::new(std::io::stderr());
            let progress = |algo: Algo, e: &minactor_core::search::ArchEval| {
                let mean = e.mean.map_or("diverged".to_string(), |m| format!("{m:.2}"));
                let verdict = if e.pass { "pass" } else { "fail" };
                let _ = writeln!(log.lock().expect("stderr lock"), "{algo} {}: {mean} {verdict}", e.arch);
            };
            let results = run_experiment(&config, &LocalTrainer, resume, Some(&progress))?;
            write!(out, "{}", emit_report(&results, ReportFormat::Markdown)).map_err(io_err)
        }
        Command::Eval {
            snapshot,
            episodes,
            seed,
        } => {
            let snap = Snapshot::load(&snapshot)?;
            let mut agent = make_agent(snap.env, &snap.config, snap.seed)?;
            agent.load_actor(snap.actor)?;
            let n = episodes.unwrap_or(snap.config.eval_episodes);
            let stats = evaluate_policy(&mut agent, snap.env, n, seed.unwrap_or_else(|| eval_seed(snap.seed)))?;
            writeln!(out, "{} episodes: {:.2} ± {:.2}", n, stats.mean, stats.std).map_err(io_err)
        }
        Command::Params { env, format } => {
            let envs: Vec<EnvKind> = env.map_or_else(|| EnvKind::ALL.to_vec(), |e| vec![e]);
            write!(out, "{}", params_table(&envs, format.into())?).map_err(io_err)
        }
        Command::Report {
            env,
            out: out_dir,
            format,
        } => {
            let root = out_dir.unwrap_or_else(default_out_dir);
            let (_, results) = replay_experiment(&root, env)?;
            if results.is_empty() {
                writeln!(err, "no completed algorithms").map_err(io_err)?;
            }
            write!(out, "{}", emit_report(&results, format.into())).map_err(io_err)
        }
    }
}

fn train_summary(record: &RunRecord) -> String {
    let eval = match &record.final_eval {
        Some(e) if !record.diverged => format!("final eval {:.2} ± {:.2}", e.mean, e.std),
        _ => format!("diverged: {}", record.divergence.as_deref().unwrap_or("unknown")),
    };
    format!(
        "{} {} {} seed {}: {} episodes, {} gradient steps, {eval} ({:.1}s)",
        record.env,
        record.config.algo,
        record.config.arch,
        record.seed,
        record.episodes.len(),
        record.gradient_steps,
        record.wall_clock_secs
    )
}

/// Actor weight counts per rung, one column per environment.
pub fn params_table(envs: &[EnvKind], format: ReportFormat) -> Result<String> {
    let ladder = Ladder::default();
    let mut rows = vec![std::iter::once("Hidden".to_string())
        .chain(envs.iter().map(|e| e.name().to_string()))
        .collect::<Vec<_>>()];
    for rung in ladder.rungs().iter().rev() {
        let mut row = vec![size_label(rung)];
        for e in envs {
            row.push(param_count(e.obs_dim(), rung, e.act_dim())?.to_string());
        }
        rows.push(row);
    }
    Ok(match format {
        ReportFormat::Markdown => {
            let mut s = String::new();
            for (i, row) in rows.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
                s.push_str(&format!("| {} |\n", cells.join(" | ")));
                if i == 0 {
                    s.push_str(&format!("|{}\n", "---|".repeat(row.len())));
                }
            }
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for row in &rows {
                w.write_record(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
    })
}
