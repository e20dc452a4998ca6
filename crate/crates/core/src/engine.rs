//! Group inference with progressive pruning.
//!
//! Each step advances every live candidate once, scores the previews, and
//! solves the selection program down to the next scheduled pool size. Once
//! the pool holds `k` candidates only the survivors keep running. At the last
//! step the pool is cut to `k` no matter what the schedule reached, so a run
//! always ends with exactly `k` outputs.
//!
//! The generator and the scores are both behind traits: [`StepModel`] and
//! [`GroupScorer`]. [`group_inference`] wires in the toy flow model; foreign
//! pipelines plug in through [`CallbackModel`] and [`CallbackScorer`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::qip::{self, Method, ScoreSet, SelectionProblem, SolverConfig, Strategy};
use crate::schedule::{build_schedule, next_pool_size};
use crate::scores::{ExternalScores, FeatureVec, ScoreSpec, Scorer};
use crate::toygen::{MixtureSpec, ToyModel};
use crate::{Error, Result};

/// A pool of candidates advanced step by step.
pub trait StepModel {
    fn pool_size(&self) -> usize;

    /// Advances each candidate in `live` by one step and returns its preview
    /// of the final output, in the order given. On the last step the
    /// previews are the final outputs.
    fn advance(&mut self, step: usize, live: &[usize]) -> Result<Vec<FeatureVec>>;

    /// Single-candidate evaluations so far.
    fn nfe(&self) -> u64;
}

pub trait GroupScorer {
    fn unary(&self, previews: &[FeatureVec]) -> Result<Vec<f64>>;

    fn binary(&self, previews: &[FeatureVec]) -> Result<Vec<Vec<f64>>>;

    fn score_set(&self, previews: &[FeatureVec]) -> Result<ScoreSet> {
        ScoreSet::new(self.unary(previews)?, self.binary(previews)?)
    }
}

/// Millisecond time source for per-step wall times. The core has no clock of
/// its own; without one, step records carry no timing.
pub trait Clock {
    fn now_ms(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub t_total: usize,
    pub lambda: f64,
    pub seed: u64,
    pub dimension: usize,
    pub condition: MixtureSpec,
    pub score_spec: ScoreSpec,
    pub strategy: Strategy,
    /// z-score the unary and pairwise scores before every solve.
    pub normalize: bool,
}

impl RunConfig {
    /// The default toy task: four well separated planar modes.
    pub fn toy(m: usize, k: usize, rho: f64, t_total: usize, lambda: f64, seed: u64) -> Self {
        RunConfig {
            m,
            k,
            rho,
            t_total,
            lambda,
            seed,
            dimension: 2,
            condition: default_condition(),
            score_spec: ScoreSpec::default(),
            strategy: Strategy::Auto,
            normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        build_schedule(self.m, self.k, self.rho, self.t_total)?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!(
                "lambda = {} must be nonnegative",
                self.lambda
            )));
        }
        if self.dimension != self.condition.dim() {
            return Err(Error::validation(format!(
                "dimension = {} but the condition lives in {} dimensions",
                self.dimension,
                self.condition.dim()
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> EngineParams {
        EngineParams {
            k: self.k,
            rho: self.rho,
            t_total: self.t_total,
            lambda: self.lambda,
            strategy: self.strategy,
            solver: SolverConfig::default(),
            normalize: self.normalize,
            score_final: true,
        }
    }
}

/// Mode spread of the default toy condition.
pub const TOY_SPREAD: f64 = 20.0;
/// Shared standard deviation of the default toy condition.
pub const TOY_SIGMA: f64 = 0.25;

/// Four equal-weight modes at `(+-20, +-20)` with `sigma = 0.25`. The modes are
/// far apart relative to the unit noise, so previews commit to a mode within
/// the first few steps.
pub fn default_condition() -> MixtureSpec {
    MixtureSpec::four_corners(TOY_SPREAD, TOY_SIGMA).expect("constant toy mixture is valid")
}

/// Everything the loop needs besides the model and the scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    pub k: usize,
    pub rho: f64,
    pub t_total: usize,
    pub lambda: f64,
    pub strategy: Strategy,
    pub solver: SolverConfig,
    pub normalize: bool,
    /// Score the finished group once more for the report. Callers that must
    /// not trigger extra scoring calls turn this off.
    pub score_final: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Live candidates advanced at this step.
    pub pool_size: usize,
    /// Candidate ids still alive after the step, ascending.
    pub selected: Vec<usize>,
    /// Solver used to prune at this step, if any pruning happened.
    pub strategy: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub final_indices: Vec<usize>,
    pub final_samples: Vec<Vec<f64>>,
    /// Selection objective of the final group, evaluated on final samples.
    /// Absent when the run was asked not to score its output.
    pub objective: Option<f64>,
    pub mean_unary: Option<f64>,
    /// Mean pairwise score over the final group's pairs.
    pub mean_binary: Option<f64>,
    pub steps: Vec<StepRecord>,
    pub nfe_counted: u64,
    pub nfe_predicted: u64,
}

/// Runs the pruning loop over an arbitrary model and scorer.
pub fn run(
    model: &mut dyn StepModel,
    scorer: &dyn GroupScorer,
    params: &EngineParams,
    clock: Option<&dyn Clock>,
) -> Result<RunReport> {
    let m = model.pool_size();
    let schedule = build_schedule(m, params.k, params.rho, params.t_total)?;
    if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
        return Err(Error::validation(format!(
            "lambda = {} must be nonnegative",
            params.lambda
        )));
    }
    let nfe_start = model.nfe();

    let mut alive: Vec<usize> = (0..m).collect();
    let mut previews = Vec::new();
    let mut steps = Vec::with_capacity(params.t_total);
    for step in 0..params.t_total {
        let started = clock.map(|c| c.now_ms());
        previews = model.advance(step, &alive).map_err(|e| e.at_step(step))?;
        if previews.len() != alive.len() {
            return Err(Error::Callback(format!(
                "model returned {} previews for {} candidates",
                previews.len(),
                alive.len()
            ))
            .at_step(step));
        }
        let pool_size = alive.len();
        let target = if step + 1 == params.t_total {
            params.k
        } else {
            next_pool_size(pool_size, params.k, params.rho)
        };
        let mut method = None;
        if target < pool_size {
            let sel = prune(scorer, &previews, target, params).map_err(|e| e.at_step(step))?;
            alive = sel.indices.iter().map(|&i| alive[i]).collect();
            previews = sel.indices.iter().map(|&i| previews[i].clone()).collect();
            method = Some(sel.method);
        }
        steps.push(StepRecord {
            step,
            pool_size,
            selected: alive.clone(),
            strategy: method,
            wall_ms: clock.zip(started).map(|(c, s)| c.now_ms() - s),
        });
    }

    let (objective, mean_unary, mean_binary) = if params.score_final {
        let (o, u, b) = evaluate_group(scorer, &previews, params.lambda)?;
        (Some(o), Some(u), Some(b))
    } else {
        (None, None, None)
    };
    Ok(RunReport {
        final_indices: alive,
        final_samples: previews.into_iter().map(FeatureVec::into_inner).collect(),
        objective,
        mean_unary,
        mean_binary,
        steps,
        nfe_counted: model.nfe() - nfe_start,
        nfe_predicted: schedule.nfe,
    })
}

fn prune(
    scorer: &dyn GroupScorer,
    previews: &[FeatureVec],
    target: usize,
    params: &EngineParams,
) -> Result<qip::Selection> {
    let mut scores = scorer.score_set(previews)?;
    if params.normalize {
        scores = scores.zscore_normalized();
    }
    let problem = SelectionProblem::new(scores, target, params.lambda)?;
    qip::solve(&problem, params.strategy, &params.solver)
}

/// Objective, mean unary and mean pairwise score of a whole group.
pub fn evaluate_group(
    scorer: &dyn GroupScorer,
    group: &[FeatureVec],
    lambda: f64,
) -> Result<(f64, f64, f64)> {
    let scores = scorer.score_set(group)?;
    let all: Vec<usize> = (0..group.len()).collect();
    let p = SelectionProblem::new(scores, group.len(), lambda)?;
    let (mean_unary, mean_binary) = p.group_means(&all);
    Ok((p.objective_value(&all)?, mean_unary, mean_binary))
}

/// Group inference on the toy flow model.
pub fn group_inference(cfg: &RunConfig) -> Result<RunReport> {
    group_inference_with(cfg, &ExternalScores::default(), None)
}

pub fn group_inference_with(
    cfg: &RunConfig,
    external: &ExternalScores,
    clock: Option<&dyn Clock>,
) -> Result<RunReport> {
    cfg.validate()?;
    let mut model = ToyModel::new(cfg.seed, cfg.m, cfg.t_total, cfg.condition.clone())?;
    let scorer = Scorer {
        cond: &cfg.condition,
        spec: &cfg.score_spec,
        external,
    };
    run(&mut model, &scorer, &cfg.params(), clock)
}

/// Independent sampling: the first `k` seeded candidates run to completion
/// with no selection. The objective is computed afterwards.
pub fn iid_baseline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let iid = RunConfig {
        m: cfg.k,
        ..cfg.clone()
    };
    group_inference(&iid)
}

/// All `m` candidates run to completion and one solve picks the group.
pub fn final_select_baseline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    group_inference(&RunConfig {
        rho: 1.0,
        ..cfg.clone()
    })
}

type StepFn<'a> = dyn FnMut(usize, &[usize]) -> core::result::Result<Vec<f64>, String> + 'a;

/// Adapts a flat-buffer step callback to [`StepModel`].
///
/// The callback receives the step index and the live candidate ids and
/// returns `live.len() * dim` values, one preview per row. Each listed
/// candidate counts as one evaluation.
pub struct CallbackModel<'a> {
    m: usize,
    dim: usize,
    step: alloc::boxed::Box<StepFn<'a>>,
    nfe: u64,
}

impl<'a> CallbackModel<'a> {
    pub fn new(
        m: usize,
        dim: usize,
        step: impl FnMut(usize, &[usize]) -> core::result::Result<Vec<f64>, String> + 'a,
    ) -> Self {
        CallbackModel {
            m,
            dim,
            step: alloc::boxed::Box::new(step),
            nfe: 0,
        }
    }
}

impl StepModel for CallbackModel<'_> {
    fn pool_size(&self) -> usize {
        self.m
    }

    fn advance(&mut self, step: usize, live: &[usize]) -> Result<Vec<FeatureVec>> {
        let flat = (self.step)(step, live).map_err(Error::Callback)?;
        self.nfe += live.len() as u64;
        if flat.len() != live.len() * self.dim {
            return Err(Error::Callback(format!(
                "step callback returned {} values, expected {} x {}",
                flat.len(),
                live.len(),
                self.dim
            )));
        }
        flat.chunks(self.dim.max(1))
            .map(|row| FeatureVec::new(row.to_vec()))
            .collect()
    }

    fn nfe(&self) -> u64 {
        self.nfe
    }
}

type FlatScoreFn<'a> = dyn Fn(&[f64], usize, usize) -> core::result::Result<Vec<f64>, String> + 'a;

/// Scores previews through flat-buffer callbacks taking `(buffer, n, dim)`.
/// The unary callback returns `n` values, the binary one `n * n` row-major.
pub struct CallbackScorer<'a> {
    unary: alloc::boxed::Box<FlatScoreFn<'a>>,
    binary: alloc::boxed::Box<FlatScoreFn<'a>>,
}

impl<'a> CallbackScorer<'a> {
    pub fn new(
        unary: impl Fn(&[f64], usize, usize) -> core::result::Result<Vec<f64>, String> + 'a,
        binary: impl Fn(&[f64], usize, usize) -> core::result::Result<Vec<f64>, String> + 'a,
    ) -> Self {
        CallbackScorer {
            unary: alloc::boxed::Box::new(unary),
            binary: alloc::boxed::Box::new(binary),
        }
    }
}

fn flatten(previews: &[FeatureVec]) -> (Vec<f64>, usize) {
    let dim = previews.first().map_or(0, |p| p.dim());
    (
        previews.iter().flat_map(|p| p.iter().copied()).collect(),
        dim,
    )
}

impl GroupScorer for CallbackScorer<'_> {
    fn unary(&self, previews: &[FeatureVec]) -> Result<Vec<f64>> {
        let (flat, dim) = flatten(previews);
        let out = (self.unary)(&flat, previews.len(), dim).map_err(Error::Callback)?;
        if out.len() != previews.len() {
            return Err(Error::Callback(format!(
                "unary callback returned {} values for {} candidates",
                out.len(),
                previews.len()
            )));
        }
        Ok(out)
    }

    fn binary(&self, previews: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        let n = previews.len();
        let (flat, dim) = flatten(previews);
        let out = (self.binary)(&flat, n, dim).map_err(Error::Callback)?;
        if out.len() != n * n {
            return Err(Error::Callback(format!(
                "binary callback returned {} values for {n} x {n}",
                out.len()
            )));
        }
        Ok(out.chunks(n.max(1)).map(<[f64]>::to_vec).collect())
    }
}

/// Selected candidate ids across steps must only ever shrink.
pub fn is_nested(report: &RunReport) -> bool {
    let mut prev: Option<&[usize]> = None;
    for rec in &report.steps {
        if let Some(p) = prev {
            if !rec.selected.iter().all(|id| p.binary_search(id).is_ok()) {
                return false;
            }
        }
        prev = Some(&rec.selected);
    }
    prev.is_none_or(|p| report.final_indices.as_slice() == p)
}

#[allow(dead_code)]
fn _assert_object_safe(_: &dyn StepModel, _: &dyn GroupScorer) {}
