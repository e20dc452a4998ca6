//! Per-step CSV export of a [`RunReport`].

use std::io::Write;

use groupinf_core::engine::RunReport;
use groupinf_core::qip::Method;
use serde::Serialize;

use crate::{HarnessError, Result};

#[derive(Serialize)]
struct StepRow {
    step: usize,
    pool_size: usize,
    /// Space separated candidate ids.
    selected: String,
    strategy: Option<Method>,
    wall_ms: Option<f64>,
}

/// One row per step: `step,pool_size,selected,strategy,wall_ms`. Empty cells
/// mean no solve ran or no clock was attached.
pub fn write_steps_csv<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in &report.steps {
        let selected: Vec<String> = s.selected.iter().map(usize::to_string).collect();
        w.serialize(StepRow {
            step: s.step,
            pool_size: s.pool_size,
            selected: selected.join(" "),
            strategy: s.strategy,
            wall_ms: s.wall_ms,
        })?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}
