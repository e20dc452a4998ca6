//! Parameter sweeps over `(value, seed)` cells.
//!
//! Cells may run on several workers; rows always come back value-major,
//! seed-minor. Wall times are the only field that varies between runs.

use std::io::{Read, Write};
use std::time::Instant;

use groupinf_core::engine::{group_inference, RunConfig, RunReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{bootstrap_se, BOOTSTRAP_RESAMPLES};
use crate::{HarnessError, Result};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GROUPINF_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Lambda,
    M,
    Rho,
    TTotal,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::M => "m",
            Axis::Rho => "rho",
            Axis::TTotal => "t_total",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(HarnessError::Invalid(format!(
                    "{} must be a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        let mut cfg = base.clone();
        match self {
            Axis::Lambda => cfg.lambda = value,
            Axis::Rho => cfg.rho = value,
            Axis::M => cfg.m = count()?,
            Axis::TTotal => cfg.t_total = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Each cell is timed this many times; the reported wall time is the
    /// mean.
    pub repeats: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(HarnessError::Invalid("sweep has no values".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Invalid("sweep has no seeds".into()));
        }
        if self.repeats == 0 {
            return Err(HarnessError::Invalid("repeats must be at least 1".into()));
        }
        for &v in &self.values {
            self.axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    pub seed: u64,
    pub objective: f64,
    pub mean_unary: f64,
    pub mean_binary: f64,
    pub nfe: u64,
    pub wall_ms: f64,
    /// Bootstrap standard error of the mean objective over this value's
    /// seeds; repeated on each of its rows.
    pub boot_se_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows for one axis value, in seed order.
    pub fn cell(&self, value: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.value == value)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<SweepRow>, _>>()?;
        Ok(SweepResult { rows })
    }
}

/// Worker count: the explicit flag, else the environment, else the number
/// of available cores.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var(WORKERS_ENV).ok()?.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` over every item on `workers` threads, keeping input order.
pub fn parallel_map<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

struct CellOutcome {
    report: RunReport,
    wall_ms: f64,
}

fn run_cell(cfg: &RunConfig, repeats: usize) -> Result<CellOutcome> {
    let mut total_ms = 0.0;
    let mut report = None;
    for _ in 0..repeats {
        let started = Instant::now();
        let r = group_inference(cfg)?;
        total_ms += started.elapsed().as_secs_f64() * 1e3;
        report = Some(r);
    }
    let report = report.expect("repeats >= 1");
    Ok(CellOutcome {
        report,
        wall_ms: total_ms / repeats as f64,
    })
}

pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let cells: Vec<(usize, f64, u64)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(vi, &v)| spec.seeds.iter().map(move |&s| (vi, v, s)))
        .collect();

    let outcomes = parallel_map(&cells, workers, |&(_, value, seed)| {
        let mut cfg = spec.axis.apply(&spec.base, value)?;
        cfg.seed = seed;
        run_cell(&cfg, spec.repeats)
    });

    let mut rows = Vec::with_capacity(cells.len());
    for (&(_, value, seed), outcome) in cells.iter().zip(outcomes) {
        let CellOutcome { report, wall_ms } = outcome.map_err(|e| HarnessError::Cell {
            axis: spec.axis.name().into(),
            value,
            seed,
            source: Box::new(e),
        })?;
        rows.push(SweepRow {
            axis: spec.axis,
            value,
            seed,
            objective: report.objective.unwrap_or(f64::NAN),
            mean_unary: report.mean_unary.unwrap_or(f64::NAN),
            mean_binary: report.mean_binary.unwrap_or(f64::NAN),
            nfe: report.nfe_counted,
            wall_ms,
            boot_se_objective: 0.0,
        });
    }

    for (vi, chunk) in rows.chunks_mut(spec.seeds.len()).enumerate() {
        let objectives: Vec<f64> = chunk.iter().map(|r| r.objective).collect();
        let se = bootstrap_se(&objectives, BOOTSTRAP_RESAMPLES, vi as u64);
        for row in chunk {
            row.boot_se_objective = se;
        }
    }
    Ok(SweepResult { rows })
}
