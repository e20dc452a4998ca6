//! Quality and diversity scores over candidate features.
//!
//! Unary scores measure how well one candidate fits the condition; binary
//! scores measure how different two candidates are. Either side can be
//! swapped for an externally registered callback.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::qip::ScoreSet;
use crate::toygen::MixtureSpec;
use crate::{math, Error, Result};

/// A finite, nonempty feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVec(Vec<f64>);

impl FeatureVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("feature vector is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("feature vector has a non-finite entry"));
        }
        Ok(FeatureVec(values))
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        FeatureVec(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for FeatureVec {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnaryKind {
    /// `log p(x)` under the conditioning mixture.
    #[default]
    MixtureLoglik,
    /// `-min_c |x - mu_c|`.
    NegDistToNearestMode,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryKind {
    #[default]
    Euclidean,
    OneMinusCosine,
    /// 1 when the two candidates sit closest to different mixture modes.
    ModeLabelMismatch,
    External,
}

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSpec {
    #[serde(default)]
    pub unary_kind: UnaryKind,
    #[serde(default)]
    pub binary_kind: BinaryKind,
    /// Passed through to external callbacks.
    #[serde(default)]
    pub params: Params,
}

pub type UnaryCallback =
    Box<dyn Fn(&[FeatureVec], &Params) -> core::result::Result<Vec<f64>, String> + Send + Sync>;
/// Returns a row-major `n * n` matrix.
pub type BinaryCallback =
    Box<dyn Fn(&[FeatureVec], &Params) -> core::result::Result<Vec<f64>, String> + Send + Sync>;

/// Callbacks backing the `external` score kinds.
#[derive(Default)]
pub struct ExternalScores {
    pub unary: Option<UnaryCallback>,
    pub binary: Option<BinaryCallback>,
}

impl core::fmt::Debug for ExternalScores {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ExternalScores")
            .field("unary", &self.unary.is_some())
            .field("binary", &self.binary.is_some())
            .finish()
    }
}

/// `log sum_c w_c N(x; mu_c, sigma^2 I)`.
pub fn mixture_loglik(x: &[f64], cond: &MixtureSpec) -> f64 {
    let var = cond.sigma() * cond.sigma();
    let d = x.len() as f64;
    let norm = -0.5 * d * math::ln(2.0 * core::f64::consts::PI * var);
    let terms: Vec<f64> = cond
        .weights()
        .iter()
        .zip(cond.means())
        .map(|(w, mu)| math::ln(*w) + norm - sq_dist(x, mu) / (2.0 * var))
        .collect();
    math::log_sum_exp(&terms)
}

/// Index of the closest mixture mean; the lowest index wins ties.
pub fn nearest_mode(x: &[f64], cond: &MixtureSpec) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, mu) in cond.means().iter().enumerate() {
        let d = sq_dist(x, mu);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(previews: &[FeatureVec], cond: &MixtureSpec) -> Result<()> {
    if previews.is_empty() {
        return Err(Error::validation("no candidates to score"));
    }
    if let Some(p) = previews.iter().find(|p| p.dim() != cond.dim()) {
        return Err(Error::validation(format!(
            "candidate has dimension {}, condition has {}",
            p.dim(),
            cond.dim()
        )));
    }
    Ok(())
}

pub fn unary_scores(
    previews: &[FeatureVec],
    cond: &MixtureSpec,
    spec: &ScoreSpec,
    external: &ExternalScores,
) -> Result<Vec<f64>> {
    match spec.unary_kind {
        UnaryKind::External => {
            let cb = external
                .unary
                .as_ref()
                .ok_or_else(|| Error::Config("no external unary score registered".into()))?;
            if previews.is_empty() {
                return Err(Error::validation("no candidates to score"));
            }
            let out = cb(previews, &spec.params).map_err(Error::Callback)?;
            if out.len() != previews.len() {
                return Err(Error::validation(format!(
                    "external unary score returned {} values for {} candidates",
                    out.len(),
                    previews.len()
                )));
            }
            Ok(out)
        }
        UnaryKind::MixtureLoglik => {
            check_dims(previews, cond)?;
            Ok(previews.iter().map(|x| mixture_loglik(x, cond)).collect())
        }
        UnaryKind::NegDistToNearestMode => {
            check_dims(previews, cond)?;
            Ok(previews
                .iter()
                .map(|x| {
                    let c = nearest_mode(x, cond);
                    -math::sqrt(sq_dist(x, &cond.means()[c]))
                })
                .collect())
        }
    }
}

/// Symmetric, zero-diagonal pairwise matrix.
pub fn binary_scores(
    previews: &[FeatureVec],
    cond: &MixtureSpec,
    spec: &ScoreSpec,
    external: &ExternalScores,
) -> Result<Vec<Vec<f64>>> {
    let n = previews.len();
    let pairwise = |f: &dyn Fn(&FeatureVec, &FeatureVec) -> f64| {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(&previews[i], &previews[j]);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    };
    match spec.binary_kind {
        BinaryKind::External => {
            let cb = external
                .binary
                .as_ref()
                .ok_or_else(|| Error::Config("no external binary score registered".into()))?;
            if previews.is_empty() {
                return Err(Error::validation("no candidates to score"));
            }
            let flat = cb(previews, &spec.params).map_err(Error::Callback)?;
            if flat.len() != n * n {
                return Err(Error::validation(format!(
                    "external binary score returned {} values for {n}x{n}",
                    flat.len()
                )));
            }
            Ok(flat.chunks(n).map(<[f64]>::to_vec).collect())
        }
        BinaryKind::Euclidean => {
            check_dims(previews, cond)?;
            Ok(pairwise(&|a, b| math::sqrt(sq_dist(a, b))))
        }
        BinaryKind::OneMinusCosine => {
            check_dims(previews, cond)?;
            Ok(pairwise(&one_minus_cosine))
        }
        BinaryKind::ModeLabelMismatch => {
            check_dims(previews, cond)?;
            let labels: Vec<usize> = previews.iter().map(|x| nearest_mode(x, cond)).collect();
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if labels[i] != labels[j] {
                        m[i][j] = 1.0;
                    }
                }
            }
            Ok(m)
        }
    }
}

/// `1 - cos(a, b)` in `[0, 2]`; a pair involving a zero vector scores 1.
///
/// Evaluated as `|a/|a| - b/|b||^2 / 2`, which is exactly zero for parallel
/// vectors of equal direction.
pub fn one_minus_cosine(a: &FeatureVec, b: &FeatureVec) -> f64 {
    let na = math::sqrt(a.iter().map(|v| v * v).sum());
    let nb = math::sqrt(b.iter().map(|v| v * v).sum());
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let gap: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x / na - y / nb;
            d * d
        })
        .sum();
    (0.5 * gap).clamp(0.0, 2.0)
}

pub fn assemble(unary: Vec<f64>, binary: Vec<Vec<f64>>) -> Result<ScoreSet> {
    ScoreSet::new(unary, binary)
}

/// Scores previews against a mixture condition with a fixed [`ScoreSpec`].
#[derive(Debug)]
pub struct Scorer<'a> {
    pub cond: &'a MixtureSpec,
    pub spec: &'a ScoreSpec,
    pub external: &'a ExternalScores,
}

impl crate::engine::GroupScorer for Scorer<'_> {
    fn unary(&self, previews: &[FeatureVec]) -> Result<Vec<f64>> {
        unary_scores(previews, self.cond, self.spec, self.external)
    }

    fn binary(&self, previews: &[FeatureVec]) -> Result<Vec<Vec<f64>>> {
        binary_scores(previews, self.cond, self.spec, self.external)
    }
}
