use alloc::vec::Vec;

use super::{Method, Selection, SelectionProblem};
use crate::{math, Error, Result};

/// Enumerates every `k`-subset in lexicographic order and keeps the first
/// maximizer, so ties resolve to the lexicographically smallest set.
///
/// Refuses instances with more than `cap` subsets.
pub fn brute_force(p: &SelectionProblem, cap: u128) -> Result<Selection> {
    let (n, k) = (p.n(), p.k());
    let count = math::binomial(n, k);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = combo.clone();
    let mut best_obj = p.objective_sorted(&combo);
    while advance(&mut combo, n) {
        let obj = p.objective_sorted(&combo);
        if obj > best_obj {
            best_obj = obj;
            best.copy_from_slice(&combo);
        }
    }
    Ok(Selection {
        indices: best,
        objective: best_obj,
        method: Method::Exact,
    })
}

/// Steps to the next combination in lexicographic order.
fn advance(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
