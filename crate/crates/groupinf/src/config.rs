//! On-disk formats.
//!
//! Run and sweep files are TOML with an explicit `schema_version`; unknown
//! keys are rejected. Score sets are JSON (or TOML when the file name ends in
//! `.toml`) with `unary` and `binary` fields.
//!
//! ```toml
//! schema_version = 1
//!
//! [run]
//! m = 64
//! k = 4
//! rho = 0.5
//! steps = 20
//! lambda = 1.0
//! seed = 0
//!
//! [run.scores]
//! unary_kind = "mixture-loglik"
//! binary_kind = "euclidean"
//! ```

use std::fs;
use std::path::Path;

use groupinf_core::engine::{default_condition, RunConfig};
use groupinf_core::qip::{ScoreSet, Strategy};
use groupinf_core::scores::ScoreSpec;
use groupinf_core::toygen::MixtureSpec;
use serde::{Deserialize, Serialize};

use crate::sweep::{Axis, SweepSpec};
use crate::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSection {
    pub sigma: f64,
    pub components: Vec<Component>,
}

impl ConditionSection {
    fn to_mixture(&self) -> groupinf_core::Result<MixtureSpec> {
        MixtureSpec::new(
            self.components.iter().map(|c| c.weight).collect(),
            self.components.iter().map(|c| c.mean.clone()).collect(),
            self.sigma,
        )
    }
}

impl From<&MixtureSpec> for ConditionSection {
    fn from(m: &MixtureSpec) -> Self {
        ConditionSection {
            sigma: m.sigma(),
            components: m
                .weights()
                .iter()
                .zip(m.means())
                .map(|(&weight, mean)| Component {
                    weight,
                    mean: mean.clone(),
                })
                .collect(),
        }
    }
}

/// One run's parameters. The condition defaults to the built-in four-mode
/// toy and the scores to mixture log-likelihood plus Euclidean distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub steps: usize,
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub normalize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionSection>,
    #[serde(default)]
    pub scores: ScoreSpec,
}

impl RunSection {
    pub fn to_config(&self) -> groupinf_core::Result<RunConfig> {
        let condition = match &self.condition {
            Some(c) => c.to_mixture()?,
            None => default_condition(),
        };
        let cfg = RunConfig {
            m: self.m,
            k: self.k,
            rho: self.rho,
            t_total: self.steps,
            lambda: self.lambda,
            seed: self.seed,
            dimension: self.dimension.unwrap_or(condition.dim()),
            condition,
            score_spec: self.scores.clone(),
            strategy: self.strategy,
            normalize: self.normalize,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<&RunConfig> for RunSection {
    fn from(c: &RunConfig) -> Self {
        RunSection {
            m: c.m,
            k: c.k,
            rho: c.rho,
            steps: c.t_total,
            lambda: c.lambda,
            seed: c.seed,
            dimension: Some(c.dimension),
            strategy: c.strategy,
            normalize: c.normalize,
            condition: Some((&c.condition).into()),
            scores: c.score_spec.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub schema_version: u32,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub schema_version: u32,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub repeats: usize,
    pub base: RunSection,
}

fn one() -> usize {
    1
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_version(found: u32, path: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(HarnessError::Parse {
            path: path.into(),
            message: format!("unsupported schema_version {found} (expected {SCHEMA_VERSION})"),
        });
    }
    Ok(())
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| HarnessError::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

pub fn parse_run_config(text: &str, path: &str) -> Result<RunConfig> {
    let file: RunFile = parse_toml(text, path)?;
    check_version(file.schema_version, path)?;
    Ok(file.run.to_config()?)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    parse_run_config(&read(path)?, &path.display().to_string())
}

pub fn render_run_config(cfg: &RunConfig) -> String {
    let file = RunFile {
        schema_version: SCHEMA_VERSION,
        run: cfg.into(),
    };
    toml::to_string(&file).expect("run files always serialize")
}

pub fn parse_sweep(text: &str, path: &str) -> Result<SweepSpec> {
    let file: SweepFile = parse_toml(text, path)?;
    check_version(file.schema_version, path)?;
    let spec = SweepSpec {
        base: file.base.to_config()?,
        axis: file.axis,
        values: file.values,
        seeds: file.seeds,
        repeats: file.repeats,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    parse_sweep(&read(path)?, &path.display().to_string())
}

pub fn parse_scores(text: &str, path: &str) -> Result<ScoreSet> {
    let parsed = if path.ends_with(".toml") {
        toml::from_str(text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| HarnessError::Parse {
        path: path.into(),
        message,
    })
}

pub fn load_scores(path: &Path) -> Result<ScoreSet> {
    parse_scores(&read(path)?, &path.display().to_string())
}
