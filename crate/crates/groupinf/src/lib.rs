//! Files, statistics and experiments around `groupinf-core`.
//!
//! * [`config`]: run, sweep and score-set file formats.
//! * [`stats`]: Spearman rank correlation and bootstrap helpers.
//! * [`correlate`]: how well mid-trajectory previews predict final scores.
//! * [`sweep`]: parameter sweeps emitting tidy CSV.
//! * [`report`]: per-step CSV export of run reports.
//! * [`cli`]: the `groupinf` command line.

pub mod cli;
pub mod config;
pub mod correlate;
pub mod report;
pub mod stats;
pub mod sweep;

use std::time::Instant;

pub use groupinf_core as core;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] groupinf_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("sweep cell {axis}={value}, seed {seed}: {source}")]
    Cell {
        axis: String,
        value: f64,
        seed: u64,
        #[source]
        source: Box<HarnessError>,
    },
}

impl HarnessError {
    /// Process exit code: 1 for bad input, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) if !e.is_validation() => 2,
            HarnessError::Csv(_) => 2,
            HarnessError::Cell { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Wall clock measured from construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl groupinf_core::engine::Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}
