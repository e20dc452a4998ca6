//! Depth-first branch-and-bound over include/exclude decisions in index
//! order.
//!
//! Taking the include branch first visits leaves in lexicographic order.
//! Leaf values come from [`SelectionProblem::objective_sorted`], the same
//! routine [`super::brute_force`] uses, so an exact solve reproduces the
//! oracle's value and tie-break bit-for-bit.
//!
//! Bound at a node with chosen set `S`, `r` open slots and undecided
//! candidates `R`: every `i` in `R` gets the optimistic gain
//!
//! ```text
//!     g_i = u_i + lambda * (sum_{j in S} b_ij + 1/2 * top_{r-1}{ b_ij : j in R, j != i })
//! ```
//!
//! and the node is worth at most `f(S) + top_r{ g_i }`. Each pair inside the
//! completion is counted once from either endpoint, and each endpoint's
//! share is dominated by its `r - 1` largest incident entries, so the bound
//! is admissible for any sign of `b`.

use alloc::vec;
use alloc::vec::Vec;

use super::{greedy, Method, Selection, SelectionProblem};
use crate::{Error, Result};

/// Exact solve with the default hard node budget.
pub fn solve_exact(p: &SelectionProblem) -> Result<Selection> {
    solve_exact_with_limit(p, super::SolverConfig::default().node_limit)
}

pub(crate) fn solve_exact_with_limit(p: &SelectionProblem, node_limit: u64) -> Result<Selection> {
    let (n, k) = (p.n(), p.k());
    if k == n {
        return Ok(p.full_selection());
    }
    if is_flat(p) {
        // every subset sums identical terms in identical order
        let indices: Vec<usize> = (0..k).collect();
        let objective = p.objective_sorted(&indices);
        return Ok(Selection {
            indices,
            objective,
            method: Method::Exact,
        });
    }

    let start = greedy::solve_greedy(p);
    let mut search = Search::new(p, start.indices, start.objective, node_limit);
    search.descend(0)?;
    Ok(Selection {
        indices: search.best,
        objective: search.best_obj,
        method: Method::Exact,
    })
}

fn is_flat(p: &SelectionProblem) -> bool {
    let s = p.scores();
    let n = s.n();
    let u0 = s.unary()[0];
    if s.unary().iter().any(|&u| u != u0) {
        return false;
    }
    if n < 2 {
        return true;
    }
    let b0 = s.pair(0, 1);
    (0..n).all(|i| (0..n).all(|j| i == j || s.pair(i, j) == b0))
}

struct Search<'a> {
    p: &'a SelectionProblem,
    // for each i, the other candidates ordered by b_ij descending
    by_affinity: Vec<Vec<usize>>,
    chosen: Vec<usize>,
    // sum_{j in chosen} b_ij for every i
    linked: Vec<f64>,
    partial: f64,
    best: Vec<usize>,
    best_obj: f64,
    tol: f64,
    nodes: u64,
    limit: u64,
    gains: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(p: &'a SelectionProblem, best: Vec<usize>, best_obj: f64, limit: u64) -> Self {
        let n = p.n();
        let s = p.scores();
        let by_affinity = (0..n)
            .map(|i| {
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| s.pair(i, b).total_cmp(&s.pair(i, a)).then(a.cmp(&b)));
                others
            })
            .collect();
        Search {
            p,
            by_affinity,
            chosen: Vec::with_capacity(p.k()),
            linked: vec![0.0; n],
            partial: 0.0,
            best,
            best_obj,
            tol: 1e-10 * (1.0 + p.magnitude()),
            nodes: 0,
            limit,
            gains: Vec::with_capacity(n),
        }
    }

    fn descend(&mut self, next: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(Error::BudgetExceeded { limit: self.limit });
        }
        let n = self.p.n();
        let open = self.p.k() - self.chosen.len();
        if open == 0 {
            self.offer_leaf();
            return Ok(());
        }
        let undecided = n - next;
        if undecided < open {
            return Ok(());
        }
        if undecided == open {
            let depth = self.chosen.len();
            self.chosen.extend(next..n);
            self.offer_leaf();
            self.chosen.truncate(depth);
            return Ok(());
        }
        if self.bound(next, open) < self.best_obj - self.tol {
            return Ok(());
        }

        self.include(next);
        let res = self.descend(next + 1);
        self.exclude_last(next);
        res?;
        self.descend(next + 1)
    }

    fn offer_leaf(&mut self) {
        let obj = self.p.objective_sorted(&self.chosen);
        if obj > self.best_obj || (obj == self.best_obj && self.chosen < self.best) {
            self.best_obj = obj;
            self.best.clear();
            self.best.extend_from_slice(&self.chosen);
        }
    }

    fn bound(&mut self, next: usize, open: usize) -> f64 {
        let s = self.p.scores();
        let lambda = self.p.lambda();
        let n = s.n();
        self.gains.clear();
        for i in next..n {
            let mut top = 0.0;
            let mut taken = 0;
            if open > 1 {
                for &j in &self.by_affinity[i] {
                    if j >= next {
                        top += s.pair(i, j);
                        taken += 1;
                        if taken == open - 1 {
                            break;
                        }
                    }
                }
            }
            self.gains
                .push(s.unary()[i] + lambda * (self.linked[i] + 0.5 * top));
        }
        let (_, _, _) = self
            .gains
            .select_nth_unstable_by(open - 1, |a, b| b.total_cmp(a));
        self.partial + self.gains[..open].iter().sum::<f64>()
    }

    fn include(&mut self, i: usize) {
        let s = self.p.scores();
        self.partial += s.unary()[i] + self.p.lambda() * self.linked[i];
        for (l, b) in self.linked.iter_mut().zip(s.row(i)) {
            *l += b;
        }
        self.chosen.push(i);
    }

    fn exclude_last(&mut self, i: usize) {
        let s = self.p.scores();
        self.chosen.pop();
        for (l, b) in self.linked.iter_mut().zip(s.row(i)) {
            *l -= b;
        }
        self.partial -= s.unary()[i] + self.p.lambda() * self.linked[i];
    }
}
