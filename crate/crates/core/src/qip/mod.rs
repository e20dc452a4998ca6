//! The group-selection quadratic program.
//!
//! Given unary scores `u` and a symmetric pairwise matrix `b`, choose exactly
//! `k` candidates maximizing
//!
//! ```text
//!     sum_{i in S} u_i  +  lambda * sum_{i<j in S} b_ij
//! ```
//!
//! Three solvers share one objective routine so that their results compare
//! bit-for-bit: [`brute_force`] (the verification oracle), [`solve_exact`]
//! (depth-first branch-and-bound) and [`solve_greedy`] (greedy construction
//! followed by 1-swap local search). Among optimal sets the lexicographically
//! smallest sorted index list wins.

mod brute;
mod exact;
mod greedy;

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

pub use brute::brute_force;
pub use exact::solve_exact;
pub use greedy::solve_greedy;

/// Unary vector and symmetric, zero-diagonal pairwise matrix over a pool.
///
/// Every entry is finite. Construction is the single validation site; the
/// solvers assume a valid set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScoreFile", into = "ScoreFile")]
pub struct ScoreSet {
    unary: Vec<f64>,
    // row-major n x n
    binary: Vec<f64>,
}

/// On-disk shape of a [`ScoreSet`]: `{ "unary": [..], "binary": [[..], ..] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreFile {
    pub unary: Vec<f64>,
    pub binary: Vec<Vec<f64>>,
}

impl TryFrom<ScoreFile> for ScoreSet {
    type Error = Error;

    fn try_from(f: ScoreFile) -> Result<Self> {
        ScoreSet::new(f.unary, f.binary)
    }
}

impl From<ScoreSet> for ScoreFile {
    fn from(s: ScoreSet) -> Self {
        let n = s.n();
        ScoreFile {
            binary: (0..n).map(|i| s.row(i).to_vec()).collect(),
            unary: s.unary,
        }
    }
}

impl ScoreSet {
    pub fn new(unary: Vec<f64>, binary: Vec<Vec<f64>>) -> Result<Self> {
        let n = unary.len();
        if binary.len() != n {
            return Err(Error::validation(format!(
                "binary matrix has {} rows, expected {n}",
                binary.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in binary.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "binary row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        Self::from_flat(unary, flat)
    }

    /// Builds from a row-major `n * n` buffer.
    pub fn from_flat(unary: Vec<f64>, binary: Vec<f64>) -> Result<Self> {
        let n = unary.len();
        if n == 0 {
            return Err(Error::validation("score set is empty"));
        }
        if binary.len() != n * n {
            return Err(Error::validation(format!(
                "binary buffer has {} entries, expected {n}x{n}",
                binary.len()
            )));
        }
        if let Some(i) = unary.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("unary[{i}] is not finite")));
        }
        for i in 0..n {
            if binary[i * n + i] != 0.0 {
                return Err(Error::validation(format!("binary[{i}][{i}] is nonzero")));
            }
            for j in 0..n {
                let v = binary[i * n + j];
                if !v.is_finite() {
                    return Err(Error::validation(format!("binary[{i}][{j}] is not finite")));
                }
                if j > i && v != binary[j * n + i] {
                    return Err(Error::validation(format!(
                        "binary is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(ScoreSet { unary, binary })
    }

    pub fn n(&self) -> usize {
        self.unary.len()
    }

    pub fn unary(&self) -> &[f64] {
        &self.unary
    }

    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.binary[i * self.n() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.binary[i * n..(i + 1) * n]
    }

    /// Row-major view of the pairwise matrix.
    pub fn binary_flat(&self) -> &[f64] {
        &self.binary
    }

    /// Restricts the set to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> ScoreSet {
        let unary = indices.iter().map(|&i| self.unary[i]).collect();
        let mut binary = Vec::with_capacity(indices.len() * indices.len());
        for &i in indices {
            binary.extend(indices.iter().map(|&j| self.pair(i, j)));
        }
        ScoreSet { unary, binary }
    }

    /// Standardizes `u` and the off-diagonal entries of `b` to zero mean and
    /// unit variance. Constant inputs map to all zeros.
    pub fn zscore_normalized(&self) -> ScoreSet {
        let n = self.n();
        let unary = standardize(&self.unary);
        let mut upper = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(self.pair(i, j));
            }
        }
        let upper = standardize(&upper);
        let mut binary = vec![0.0; n * n];
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = it.next().unwrap_or(0.0);
                binary[i * n + j] = v;
                binary[j * n + i] = v;
            }
        }
        ScoreSet { unary, binary }
    }
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let len = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / len;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len;
    let sd = math::sqrt(var);
    if sd == 0.0 || !sd.is_finite() {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - mean) / sd).collect()
}

/// Averages `m` with its transpose and clears the diagonal.
///
/// [`ScoreSet::new`] rejects asymmetric input; callers holding a matrix that
/// is symmetric only up to rounding can repair it explicitly with this.
#[allow(clippy::needless_range_loop)]
pub fn symmetrize(m: &mut [Vec<f64>]) {
    let n = m.len();
    for i in 0..n {
        m[i][i] = 0.0;
        for j in i + 1..n {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
}

/// A score set together with the target size `k` and tradeoff weight
/// `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    scores: ScoreSet,
    k: usize,
    lambda: f64,
}

impl SelectionProblem {
    pub fn new(scores: ScoreSet, k: usize, lambda: f64) -> Result<Self> {
        if k == 0 || k > scores.n() {
            return Err(Error::validation(format!(
                "k = {k} must lie in [1, {}]",
                scores.n()
            )));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::validation(format!(
                "lambda = {lambda} must be finite and nonnegative"
            )));
        }
        Ok(SelectionProblem { scores, k, lambda })
    }

    pub fn scores(&self) -> &ScoreSet {
        &self.scores
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.scores.n()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Objective of an index set, after checking it is a feasible selection.
    pub fn objective_value(&self, indices: &[usize]) -> Result<f64> {
        if indices.len() != self.k {
            return Err(Error::validation(format!(
                "selection has {} indices, expected {}",
                indices.len(),
                self.k
            )));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if let Some(&bad) = sorted.iter().find(|&&i| i >= self.n()) {
            return Err(Error::validation(format!(
                "index {bad} out of range for {} candidates",
                self.n()
            )));
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("selection repeats an index"));
        }
        Ok(self.objective_sorted(&sorted))
    }

    /// The one place the objective is evaluated; every solver reports values
    /// computed here, in ascending index order, so they compare exactly.
    pub(crate) fn objective_sorted(&self, sorted: &[usize]) -> f64 {
        let mut unary = 0.0;
        for &i in sorted {
            unary += self.scores.unary[i];
        }
        let mut pairwise = 0.0;
        for (a, &i) in sorted.iter().enumerate() {
            for &j in &sorted[a + 1..] {
                pairwise += self.scores.pair(i, j);
            }
        }
        unary + self.lambda * pairwise
    }

    /// Mean unary score and mean pairwise score of a sorted selection.
    pub fn group_means(&self, sorted: &[usize]) -> (f64, f64) {
        let len = sorted.len();
        let unary = sorted.iter().map(|&i| self.scores.unary[i]).sum::<f64>() / len as f64;
        let mut pairwise = 0.0;
        for (a, &i) in sorted.iter().enumerate() {
            for &j in &sorted[a + 1..] {
                pairwise += self.scores.pair(i, j);
            }
        }
        let pairs = len * (len.saturating_sub(1)) / 2;
        let binary = if pairs == 0 {
            0.0
        } else {
            pairwise / pairs as f64
        };
        (unary, binary)
    }

    fn full_selection(&self) -> Selection {
        let indices: Vec<usize> = (0..self.n()).collect();
        Selection {
            objective: self.objective_sorted(&indices),
            indices,
            method: Method::Exact,
        }
    }

    /// Rough magnitude of any feasible objective, used to scale tolerances.
    pub(crate) fn magnitude(&self) -> f64 {
        let max_u = self.scores.unary.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_b = self
            .scores
            .binary
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let k = self.k as f64;
        k * max_u + self.lambda * k * (k - 1.0) * 0.5 * max_b
    }
}

/// Requested solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Auto,
    Exact,
    Greedy,
}

/// Solver that actually produced a [`Selection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Strictly increasing.
    pub indices: Vec<usize>,
    pub objective: f64,
    #[serde(rename = "strategy")]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Largest `C(n, k)` that [`brute_force`] will enumerate.
    pub enumeration_cap: u128,
    /// `auto` tries the exact search when `n` is at most this...
    pub auto_max_n: usize,
    /// ...or when `C(n, k)` is at most this.
    pub auto_max_subsets: u128,
    /// Node budget for `auto`'s exact attempt; past it `auto` falls back to
    /// greedy.
    pub auto_node_limit: u64,
    /// Hard node budget for an explicit exact solve.
    pub node_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            enumeration_cap: 10_000_000,
            auto_max_n: 40,
            auto_max_subsets: 1_000_000,
            auto_node_limit: 200_000,
            node_limit: 200_000_000,
        }
    }
}

/// Solves with the requested strategy. `Auto` runs the exact search on
/// instances within the configured size budget and falls back to greedy
/// when that search exhausts `auto_node_limit`.
pub fn solve(p: &SelectionProblem, strategy: Strategy, config: &SolverConfig) -> Result<Selection> {
    if p.k() == p.n() {
        return Ok(p.full_selection());
    }
    match strategy {
        Strategy::Exact => exact::solve_exact_with_limit(p, config.node_limit),
        Strategy::Greedy => Ok(solve_greedy(p)),
        Strategy::Auto => {
            let small = p.n() <= config.auto_max_n
                || math::binomial(p.n(), p.k()) <= config.auto_max_subsets;
            if !small {
                return Ok(solve_greedy(p));
            }
            match exact::solve_exact_with_limit(p, config.auto_node_limit) {
                Err(Error::BudgetExceeded { .. }) => Ok(solve_greedy(p)),
                other => other,
            }
        }
    }
}

/// [`solve`] over raw row-major buffers, the shape foreign callers hold.
pub fn solve_flat(
    unary: &[f64],
    binary: &[f64],
    k: usize,
    lambda: f64,
    strategy: Strategy,
) -> Result<Selection> {
    let scores = ScoreSet::from_flat(unary.to_vec(), binary.to_vec())?;
    let p = SelectionProblem::new(scores, k, lambda)?;
    solve(&p, strategy, &SolverConfig::default())
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "exact" => Ok(Strategy::Exact),
            "greedy" => Ok(Strategy::Greedy),
            other => Err(Error::Config(String::from("unknown strategy: ") + other)),
        }
    }
}
