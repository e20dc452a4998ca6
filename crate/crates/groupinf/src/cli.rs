//! The `groupinf` command line.
//!
//! Exit codes: 0 on success, 1 for usage or validation errors, 2 for runtime
//! failures such as an exhausted solver budget.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use groupinf_core::engine::{self, Clock};
use groupinf_core::qip::{self, SelectionProblem, SolverConfig, Strategy};
use groupinf_core::schedule::build_schedule;
use groupinf_core::scores::ExternalScores;
use serde::Serialize;

use crate::sweep::{resolve_workers, run_sweep, WORKERS_ENV};
use crate::{config, correlate, report, HarnessError, Result, WallClock};

#[derive(Debug, Parser)]
#[command(
    name = "groupinf",
    version,
    about = "Diverse group selection with progressive pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Progressive pruning.
    Group,
    /// First k seeded candidates, no selection.
    Iid,
    /// Every candidate runs to the end, then one solve.
    FinalSelect,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select k candidates from a score file.
    Solve {
        scores: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "auto")]
        strategy: Strategy,
        /// z-score the unary and pairwise scores before solving.
        #[arg(long)]
        normalize: bool,
        /// Search-node limit for the exact solver.
        #[arg(long)]
        node_limit: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one group inference from a config file and print its report.
    Infer {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "group")]
        mode: Mode,
        /// Record per-step wall times (makes the report non-reproducible).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-step records as CSV.
        #[arg(long)]
        steps_csv: Option<PathBuf>,
    },
    /// Run a parameter sweep and write CSV rows.
    Sweep {
        spec: PathBuf,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step rank correlation of preview scores against final scores.
    Correlate {
        config: PathBuf,
        /// Random candidate pairs used for the pairwise correlation.
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the pruning schedule and its evaluation count.
    Nfe {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Serialize)]
struct NfeSummary<'a> {
    #[serde(flatten)]
    schedule: &'a groupinf_core::PruneSchedule,
    naive: u64,
    savings: f64,
}

fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => stdout.write_all(bytes).map_err(|source| HarnessError::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("reports serialize");
    s.push(b'\n');
    s
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Solve {
            scores,
            k,
            lambda,
            strategy,
            normalize,
            node_limit,
            out,
        } => {
            let mut set = config::load_scores(&scores)?;
            if normalize {
                set = set.zscore_normalized();
            }
            let p = SelectionProblem::new(set, k, lambda)?;
            let mut solver = SolverConfig::default();
            if let Some(limit) = node_limit {
                solver.node_limit = limit;
            }
            let sel = qip::solve(&p, strategy, &solver)?;
            emit(out.as_deref(), &to_json(&sel), stdout)
        }
        Command::Infer {
            config,
            mode,
            timing,
            out,
            steps_csv,
        } => {
            let cfg = config::load_run_config(&config)?;
            let clock = WallClock::start();
            let clock = timing.then_some(&clock as &dyn Clock);
            let report = match mode {
                Mode::Group => {
                    engine::group_inference_with(&cfg, &ExternalScores::default(), clock)?
                }
                Mode::Iid => engine::iid_baseline(&cfg)?,
                Mode::FinalSelect => engine::final_select_baseline(&cfg)?,
            };
            if let Some(path) = steps_csv {
                let mut buf = Vec::new();
                report::write_steps_csv(&report, &mut buf)?;
                emit(Some(&path), &buf, stdout)?;
            }
            emit(out.as_deref(), &to_json(&report), stdout)
        }
        Command::Sweep { spec, workers, out } => {
            let spec = config::load_sweep(&spec)?;
            let result = run_sweep(&spec, resolve_workers(workers))?;
            let mut buf = Vec::new();
            result.write_csv(&mut buf)?;
            emit(out.as_deref(), &buf, stdout)
        }
        Command::Correlate { config, pairs, out } => {
            let cfg = config::load_run_config(&config)?;
            let rows = correlate::correlate_run(&cfg, pairs)?;
            let mut buf = Vec::new();
            correlate::write_csv(&rows, &mut buf)?;
            emit(out.as_deref(), &buf, stdout)
        }
        Command::Nfe {
            m,
            k,
            rho,
            steps,
            json,
        } => {
            let s = build_schedule(m, k, rho, steps)?;
            let text = if json {
                to_json(&NfeSummary {
                    schedule: &s,
                    naive: s.nfe_naive(),
                    savings: s.savings_ratio(),
                })
            } else {
                let sizes: Vec<String> = s.sizes.iter().map(usize::to_string).collect();
                let t_star = s
                    .t_star
                    .map_or_else(|| "none".to_string(), |t| t.to_string());
                format!(
                    "sizes={}\nt_star={t_star}\nnfe={}\nnaive={}\nsavings={}\n",
                    sizes.join(","),
                    s.nfe,
                    s.nfe_naive(),
                    s.savings_ratio()
                )
                .into_bytes()
            };
            emit(None, &text, stdout)
        }
    }
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code.
pub fn main_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
