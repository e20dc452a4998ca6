//! Geometric pruning schedule and its evaluation count.
//!
//! `rho` is the retention ratio: a pool of `m` live candidates keeps
//! `max(k, ceil(rho * m))` of them after a pruning step. Every live candidate
//! is advanced once per step before pruning, so the number of model
//! evaluations is the sum of the per-step pool sizes.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{math, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub t_total: usize,
    /// Pool size at each step, first step first.
    pub sizes: Vec<usize>,
    /// Index of the first step whose pool already has `k` members; `None`
    /// when the pool never shrinks to `k` (always the case for `rho = 1`).
    pub t_star: Option<usize>,
    pub nfe: u64,
}

// Products like 0.1 * 40 land a hair above the integer; rounding them up
// would keep one candidate too many.
const CEIL_SLACK: f64 = 1e-9;

/// Pool size after one pruning step from `alive` live candidates.
pub fn next_pool_size(alive: usize, k: usize, rho: f64) -> usize {
    if rho >= 1.0 {
        return alive;
    }
    let kept = math::ceil(rho * alive as f64 - CEIL_SLACK) as usize;
    kept.max(k).min(alive)
}

fn validate(m: usize, k: usize, rho: f64, t_total: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if m < k {
        return Err(Error::validation(format!(
            "m = {m} is smaller than k = {k}"
        )));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::validation(format!("rho = {rho} must lie in (0, 1]")));
    }
    if t_total == 0 {
        return Err(Error::validation("the step count must be at least 1"));
    }
    Ok(())
}

pub fn build_schedule(m: usize, k: usize, rho: f64, t_total: usize) -> Result<PruneSchedule> {
    validate(m, k, rho, t_total)?;
    let mut sizes = Vec::with_capacity(t_total);
    let mut alive = m;
    for _ in 0..t_total {
        sizes.push(alive);
        alive = next_pool_size(alive, k, rho);
    }
    let t_star = if m == k {
        Some(0)
    } else if rho >= 1.0 {
        None
    } else {
        // the recurrence is authoritative; it may run past the last step, and
        // with rho close to 1 rounding up can stall it above k for good
        let mut step = 0;
        let mut alive = m;
        loop {
            if alive == k {
                break Some(step);
            }
            let next = next_pool_size(alive, k, rho);
            if next == alive {
                break None;
            }
            alive = next;
            step += 1;
        }
    };
    let nfe = sizes.iter().map(|&s| s as u64).sum();
    Ok(PruneSchedule {
        m,
        k,
        rho,
        t_total,
        sizes,
        t_star,
        nfe,
    })
}

/// `ceil(log(k / m) / log(rho))`, the analytic crossover step.
///
/// Agrees with [`PruneSchedule::t_star`] whenever rounding the retained
/// counts up never delays reaching `k`.
pub fn analytic_t_star(m: usize, k: usize, rho: f64) -> Option<usize> {
    if m == k {
        return Some(0);
    }
    if rho >= 1.0 || m < k || k == 0 || rho <= 0.0 {
        return None;
    }
    let x = math::ln(k as f64 / m as f64) / math::ln(rho);
    Some(math::ceil(x - CEIL_SLACK) as usize)
}

/// Evaluations without pruning: every candidate runs every step.
pub fn nfe_naive(m: usize, t_total: usize) -> Result<u64> {
    if m == 0 || t_total == 0 {
        return Err(Error::validation("m and the step count must be at least 1"));
    }
    Ok(m as u64 * t_total as u64)
}

impl PruneSchedule {
    pub fn nfe_naive(&self) -> u64 {
        self.m as u64 * self.t_total as u64
    }

    /// Fraction of naive evaluations saved, `1 - nfe / (m * T)`.
    pub fn savings_ratio(&self) -> f64 {
        1.0 - self.nfe as f64 / self.nfe_naive() as f64
    }
}
