//! Agreement between scores of mid-trajectory previews and of final
//! samples.
//!
//! With pruning off, every candidate runs to the end. At each step the
//! unary scores of the previews are rank-correlated with the unary scores of
//! the finals, and likewise the binary scores over a fixed random sample of
//! pairs.

use std::io::Write;

use groupinf_core::engine::{RunConfig, StepModel};
use groupinf_core::scores::{binary_scores, unary_scores, ExternalScores, FeatureVec};
use groupinf_core::toygen::ToyModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::spearman;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub step: usize,
    /// Time of the latent the preview was computed from.
    pub t: f64,
    /// `None` when the previews' scores are all equal (e.g. at pure noise).
    pub unary_spearman: Option<f64>,
    pub binary_spearman: Option<f64>,
}

/// `pairs` distinct unordered pairs drawn from `m` candidates; all of them
/// when there are fewer.
fn sample_pairs(m: usize, pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = m * (m - 1) / 2;
    if pairs >= total {
        return (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < pairs {
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        if i != j {
            seen.insert((i.min(j), i.max(j)));
        }
    }
    seen.into_iter().collect()
}

pub fn correlate_run(cfg: &RunConfig, pair_samples: usize) -> Result<Vec<CorrelationRow>> {
    cfg.validate()?;
    if cfg.rho != 1.0 {
        return Err(HarnessError::Invalid(format!(
            "correlation runs need rho = 1 so every candidate finishes, got {}",
            cfg.rho
        )));
    }
    if cfg.m < 2 {
        return Err(HarnessError::Invalid(
            "correlation needs at least two candidates".into(),
        ));
    }
    let ext = ExternalScores::default();
    let mut model = ToyModel::new(cfg.seed, cfg.m, cfg.t_total, cfg.condition.clone())?;
    let live: Vec<usize> = (0..cfg.m).collect();
    let pairs = sample_pairs(cfg.m, pair_samples.max(2), cfg.seed);

    let score = |previews: &[FeatureVec]| -> Result<(Vec<f64>, Vec<f64>)> {
        let u = unary_scores(previews, &cfg.condition, &cfg.score_spec, &ext)?;
        let b = binary_scores(previews, &cfg.condition, &cfg.score_spec, &ext)?;
        Ok((u, pairs.iter().map(|&(i, j)| b[i][j]).collect()))
    };

    let mut per_step = Vec::with_capacity(cfg.t_total);
    for step in 0..cfg.t_total {
        let t = model.times()[step];
        let previews = model.advance(step, &live)?;
        per_step.push((t, score(&previews)?));
    }
    let (_, (final_u, final_b)) = per_step.last().cloned().expect("at least one step");

    per_step
        .into_iter()
        .enumerate()
        .map(|(step, (t, (u, b)))| {
            Ok(CorrelationRow {
                step,
                t,
                unary_spearman: spearman(&u, &final_u)?,
                binary_spearman: spearman(&b, &final_b)?,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[CorrelationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}
