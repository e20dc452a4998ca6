use groupinf_core::schedule::{analytic_t_star, build_schedule, nfe_naive};
use proptest::prelude::*;

const MS: [usize; 5] = [4, 8, 16, 64, 128];
/// Retention ratios as exact fractions.
const RHOS: [(u64, u64); 5] = [(1, 10), (1, 4), (1, 2), (3, 4), (1, 1)];
const TS: [usize; 4] = [1, 4, 8, 20];

/// Pool sizes from the recurrence in exact integer arithmetic.
fn sizes_oracle(m: usize, k: usize, (p, q): (u64, u64), t: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(t);
    let mut alive = m as u64;
    for _ in 0..t {
        out.push(alive as usize);
        alive = ((p * alive).div_ceil(q)).max(k as u64).min(alive);
    }
    out
}

#[test]
fn sizes_match_integer_arithmetic_on_the_grid() {
    for m in MS {
        for k in [1, 2, 4] {
            for rho in RHOS {
                for t in TS {
                    let s = build_schedule(m, k, rho.0 as f64 / rho.1 as f64, t).unwrap();
                    let want = sizes_oracle(m, k, rho, t);
                    assert_eq!(s.sizes, want, "m={m} k={k} rho={rho:?} t={t}");
                    assert_eq!(s.nfe, want.iter().sum::<usize>() as u64);
                }
            }
        }
    }
}

#[test]
fn worked_example() {
    let s = build_schedule(64, 4, 0.5, 20).unwrap();
    assert_eq!(&s.sizes[..6], &[64, 32, 16, 8, 4, 4]);
    assert_eq!(s.t_star, Some(4));
    assert_eq!(s.nfe, 184);
    assert_eq!(s.nfe_naive(), 1280);
    assert_eq!(s.savings_ratio(), 0.85625);
    assert_eq!(analytic_t_star(64, 4, 0.5), Some(4));
}

#[test]
fn naive_counts() {
    assert_eq!(nfe_naive(64, 20).unwrap(), 1280);
    assert_eq!(nfe_naive(1, 1).unwrap(), 1);
    assert_eq!(nfe_naive(128, 4).unwrap(), 512);
}

#[test]
fn degenerate_schedules() {
    let s = build_schedule(4, 4, 0.5, 7).unwrap();
    assert_eq!(s.sizes, vec![4; 7]);
    assert_eq!(s.t_star, Some(0));
    assert_eq!(s.nfe, 28);
    assert_eq!(s.savings_ratio(), 0.0);

    let s = build_schedule(64, 4, 1.0, 20).unwrap();
    assert_eq!(s.sizes, vec![64; 20]);
    assert_eq!(s.t_star, None);
    assert_eq!(s.savings_ratio(), 0.0);
}

#[test]
fn bad_arguments_are_rejected() {
    for (m, k, rho, t) in [
        (3, 4, 0.5, 5),
        (4, 0, 0.5, 5),
        (8, 4, 0.0, 5),
        (8, 4, 1.5, 5),
        (8, 4, 0.5, 0),
    ] {
        let err = build_schedule(m, k, rho, t).unwrap_err();
        assert!(err.is_validation(), "{m} {k} {rho} {t}: {err}");
    }
    assert!(build_schedule(8, 4, f64::NAN, 5).is_err());
}

proptest! {
    #[test]
    fn sizes_are_bounded_and_shrink(
        k in 1usize..16,
        extra in 0usize..200,
        rho in 0.01f64..=1.0,
        t in 1usize..40,
    ) {
        let m = k + extra;
        let s = build_schedule(m, k, rho, t).unwrap();
        prop_assert_eq!(s.sizes.len(), t);
        prop_assert_eq!(s.sizes[0], m);
        prop_assert!(s.sizes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.sizes.iter().all(|&x| x >= k));
        prop_assert_eq!(s.nfe, s.sizes.iter().map(|&x| x as u64).sum::<u64>());
        prop_assert!((k * t) as u64 <= s.nfe && s.nfe <= (m * t) as u64);
        if let Some(ts) = s.t_star {
            if ts < t {
                prop_assert_eq!(s.sizes[ts], k);
                prop_assert_eq!(s.sizes[t - 1], k);
            }
            if ts > 0 && ts <= t {
                prop_assert!(s.sizes[ts - 1] > k);
            }
        }
        let savings = s.savings_ratio();
        prop_assert!((0.0..1.0).contains(&savings));
    }

    #[test]
    fn dyadic_pools_follow_the_closed_form(
        log_k in 0u32..4,
        gap in 0u32..6,
        t in 1usize..30,
    ) {
        let k = 1usize << log_k;
        let m = k << gap;
        let s = build_schedule(m, k, 0.5, t).unwrap();
        let ts = gap as usize;
        prop_assert_eq!(s.t_star, Some(ts));
        prop_assert_eq!(analytic_t_star(m, k, 0.5), Some(ts));
        let ts = ts.min(t);
        // geometric part plus the flat tail at k
        let geometric = m as f64 * (1.0 - 0.5f64.powi(ts as i32)) / 0.5;
        let expect = geometric as u64 + (k * (t - ts)) as u64;
        prop_assert_eq!(s.nfe, expect);
    }

    #[test]
    fn nfe_is_monotone_in_every_argument(
        k in 1usize..8,
        extra in 0usize..100,
        rho in 0.05f64..0.95,
        t in 1usize..25,
        bump in 0.0f64..0.05,
    ) {
        let m = k + extra;
        let base = build_schedule(m, k, rho, t).unwrap().nfe;
        prop_assert!(build_schedule(m + 1, k, rho, t).unwrap().nfe >= base);
        prop_assert!(build_schedule(m + 1, k + 1, rho, t).unwrap().nfe >= build_schedule(m + 1, k, rho, t).unwrap().nfe);
        prop_assert!(build_schedule(m, k, rho, t + 1).unwrap().nfe >= base);
        prop_assert!(build_schedule(m, k, rho + bump, t).unwrap().nfe >= base);
    }
}
