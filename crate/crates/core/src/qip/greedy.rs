use alloc::vec;
use alloc::vec::Vec;

use super::{Method, Selection, SelectionProblem};

/// Greedy construction followed by best-improvement 1-swap local search.
///
/// The first pick is the unary argmax; each later pick maximizes the
/// marginal gain `u_i + lambda * sum_{j in S} b_ij`. Ties go to the lowest
/// index. The local search only accepts strictly improving swaps, so the
/// result is never worse than the constructed set.
pub fn solve_greedy(p: &SelectionProblem) -> Selection {
    let s = p.scores();
    let (n, k, lambda) = (p.n(), p.k(), p.lambda());
    let mut in_set = vec![false; n];
    let mut linked = vec![0.0; n];
    let mut chosen = Vec::with_capacity(k);

    for _ in 0..k {
        let mut pick = usize::MAX;
        let mut pick_gain = f64::NEG_INFINITY;
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            let gain = s.unary()[i] + lambda * linked[i];
            if gain > pick_gain {
                pick_gain = gain;
                pick = i;
            }
        }
        in_set[pick] = true;
        chosen.push(pick);
        for (l, b) in linked.iter_mut().zip(s.row(pick)) {
            *l += b;
        }
    }

    chosen.sort_unstable();
    let constructed = chosen.clone();
    let constructed_obj = p.objective_sorted(&constructed);

    let tol = 1e-12 * (1.0 + p.magnitude());
    // strict improvements cannot cycle; the cap only guards pathological
    // rounding
    let max_rounds = 64 * n * k + 16;
    for _ in 0..max_rounds {
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &out) in chosen.iter().enumerate() {
            for cand in 0..n {
                if in_set[cand] {
                    continue;
                }
                let delta = s.unary()[cand] - s.unary()[out]
                    + lambda * (linked[cand] - s.pair(cand, out) - linked[out]);
                if delta > tol && best.is_none_or(|(_, _, d)| delta > d) {
                    best = Some((pos, cand, delta));
                }
            }
        }
        let Some((pos, cand, _)) = best else { break };
        let out = chosen[pos];
        in_set[out] = false;
        in_set[cand] = true;
        chosen[pos] = cand;
        for ((l, bi), bo) in linked.iter_mut().zip(s.row(cand)).zip(s.row(out)) {
            *l += bi - bo;
        }
    }

    chosen.sort_unstable();
    let obj = p.objective_sorted(&chosen);
    if obj >= constructed_obj {
        Selection {
            indices: chosen,
            objective: obj,
            method: Method::Greedy,
        }
    } else {
        Selection {
            indices: constructed,
            objective: constructed_obj,
            method: Method::Greedy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qip::{fixtures, ScoreSet};

    #[test]
    fn fixture_picks_zero_then_one() {
        let s = solve_greedy(&fixtures::three());
        assert_eq!(s.indices, vec![0, 1]);
        assert_eq!(s.objective, 8.0);
        assert_eq!(s.method, Method::Greedy);
    }

    #[test]
    fn zero_lambda_is_top_k() {
        let u = vec![0.3, 0.9, 0.1, 0.7, 0.9, 0.2];
        let n = u.len();
        let b = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 5.0 }).collect())
            .collect();
        let p = SelectionProblem::new(ScoreSet::new(u, b).unwrap(), 3, 0.0).unwrap();
        assert_eq!(solve_greedy(&p).indices, vec![1, 3, 4]);
    }

    #[test]
    fn local_search_repairs_a_greedy_trap() {
        // greedy takes 0 first, but {1, 2} is far better
        let p = SelectionProblem::new(
            ScoreSet::new(
                vec![1.0, 0.9, 0.9],
                vec![
                    vec![0.0, 0.0, 0.0],
                    vec![0.0, 0.0, 10.0],
                    vec![0.0, 10.0, 0.0],
                ],
            )
            .unwrap(),
            2,
            1.0,
        )
        .unwrap();
        let s = solve_greedy(&p);
        assert_eq!(s.indices, vec![1, 2]);
    }
}
