//! Analytic stand-in for a generative model.
//!
//! Rectified flow towards an isotropic Gaussian mixture. The forward process
//! is `x_t = (1 - t) x_0 + t eps` with `eps ~ N(0, I)`, so `x_1` is pure noise
//! and `x_0` is a data sample. For a Gaussian mixture the posterior mean
//! `E[x_0 | x_t]` has a closed form; it is both the preview of the final
//! sample and, through `v = (x_t - preview) / t`, the velocity of the
//! probability-flow ODE, which is integrated with Euler steps.

use alloc::format;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scores::FeatureVec;
use crate::{math, Error, Result};

/// Gaussian mixture with a shared isotropic standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture", into = "RawMixture")]
pub struct MixtureSpec {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    sigma: f64,
}

impl TryFrom<RawMixture> for MixtureSpec {
    type Error = Error;

    fn try_from(r: RawMixture) -> Result<Self> {
        MixtureSpec::new(r.weights, r.means, r.sigma)
    }
}

impl From<MixtureSpec> for RawMixture {
    fn from(m: MixtureSpec) -> Self {
        RawMixture {
            weights: m.weights,
            means: m.means,
            sigma: m.sigma,
        }
    }
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("mixture needs at least one component"));
        }
        if weights.len() != means.len() {
            return Err(Error::validation(format!(
                "{} weights for {} means",
                weights.len(),
                means.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::validation("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::validation("mixture dimension must be at least 1"));
        }
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::validation("mixture means differ in dimension"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("mixture means must be finite"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::validation(format!(
                "sigma = {sigma} must be positive"
            )));
        }
        Ok(MixtureSpec {
            weights,
            means,
            sigma,
        })
    }

    /// Equal-weight mixture in the plane with one mode per quadrant, centred
    /// at `(+-spread, +-spread)`.
    pub fn four_corners(spread: f64, sigma: f64) -> Result<Self> {
        let means = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .iter()
            .map(|&(a, b)| alloc::vec![a * spread, b * spread])
            .collect();
        MixtureSpec::new(alloc::vec![0.25; 4], means, sigma)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Draws `x_0` directly from the mixture.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (usize, FeatureVec) {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        let mut c = self.components() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                c = i;
                break;
            }
        }
        let x = self.means[c]
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.sigma * z
            })
            .collect();
        (c, FeatureVec::from_raw(x))
    }
}

/// Latent of one candidate at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub x: FeatureVec,
    pub t: f64,
    pub candidate_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutput {
    pub preview: FeatureVec,
    pub next: FlowState,
}

/// Counts single-candidate model evaluations. Shared by reference so that
/// candidates may be advanced from several workers.
#[derive(Debug, Default)]
pub struct NfeCounter(AtomicUsize);

impl NfeCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed) as u64
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
}

/// Initial noise for `m` candidates of dimension `d`.
///
/// Candidate `i` draws from its own ChaCha stream keyed by `(seed, i)`, so the
/// pool for a larger `m` extends the pool for a smaller one.
pub fn init_candidates(seed: u64, m: usize, d: usize) -> Vec<FlowState> {
    (0..m)
        .map(|i| FlowState {
            x: initial_noise(seed, i, d),
            t: 1.0,
            candidate_id: i,
        })
        .collect()
}

fn initial_noise(seed: u64, candidate: usize, d: usize) -> FeatureVec {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(candidate as u64);
    FeatureVec::from_raw((0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
}

/// `E[x_0 | x_t]` under the mixture.
///
/// Per component the posterior mean is
/// `((1 - t) sigma^2 x_t + t^2 mu_c) / ((1 - t)^2 sigma^2 + t^2)`, and the
/// responsibilities are proportional to `w_c N(x_t; (1 - t) mu_c, s^2 I)`
/// with `s^2` the same denominator. Both are linear in `mu_c`, so the mixture
/// average collapses onto the responsibility-weighted mean.
pub fn posterior_mean(x: &FeatureVec, t: f64, cond: &MixtureSpec) -> Result<FeatureVec> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!(
            "posterior mean needs t in (0, 1], got {t}"
        )));
    }
    if x.dim() != cond.dim() {
        return Err(Error::validation(format!(
            "latent has dimension {}, mixture has {}",
            x.dim(),
            cond.dim()
        )));
    }
    let keep = 1.0 - t;
    let var_data = cond.sigma * cond.sigma;
    let s2 = keep * keep * var_data + t * t;

    // the Gaussian normalizer is shared by every component and cancels
    let logits: Vec<f64> = cond
        .weights
        .iter()
        .zip(&cond.means)
        .map(|(w, mu)| {
            let d2: f64 = x
                .iter()
                .zip(mu)
                .map(|(xi, mi)| (xi - keep * mi) * (xi - keep * mi))
                .sum();
            math::ln(*w) - d2 / (2.0 * s2)
        })
        .collect();
    let norm = math::log_sum_exp(&logits);

    let mut mean_mu = alloc::vec![0.0; cond.dim()];
    for (logit, mu) in logits.iter().zip(&cond.means) {
        let r = math::exp(logit - norm);
        for (acc, m) in mean_mu.iter_mut().zip(mu) {
            *acc += r * m;
        }
    }
    Ok(FeatureVec::from_raw(
        x.iter()
            .zip(&mean_mu)
            .map(|(xi, mi)| (keep * var_data * xi + t * t * mi) / s2)
            .collect(),
    ))
}

/// One Euler step of the probability flow from `state.t` to `t_next`.
///
/// Counts exactly one evaluation on `counter`. A step to `t_next = 0` lands
/// on the preview itself.
pub fn denoise_step(
    state: &FlowState,
    t_next: f64,
    cond: &MixtureSpec,
    counter: &NfeCounter,
) -> Result<DenoiseOutput> {
    if !(t_next >= 0.0 && t_next < state.t) {
        return Err(Error::Domain(format!(
            "cannot step from t = {} to t = {t_next}",
            state.t
        )));
    }
    let preview = posterior_mean(&state.x, state.t, cond)?;
    counter.bump();
    let x = if t_next == 0.0 {
        preview.clone()
    } else {
        let dt = t_next - state.t;
        FeatureVec::from_raw(
            state
                .x
                .iter()
                .zip(preview.iter())
                .map(|(x, p)| x + dt * (x - p) / state.t)
                .collect(),
        )
    };
    Ok(DenoiseOutput {
        preview,
        next: FlowState {
            x,
            t: t_next,
            candidate_id: state.candidate_id,
        },
    })
}

/// Uniform grid from 1 down to 0 with `t_total + 1` knots.
pub fn make_timesteps(t_total: usize) -> Vec<f64> {
    (0..=t_total)
        .map(|j| (t_total - j) as f64 / t_total as f64)
        .collect()
}

/// A seeded pool of toy candidates advanced in lock-step.
#[derive(Debug)]
pub struct ToyModel {
    cond: MixtureSpec,
    states: Vec<FlowState>,
    times: Vec<f64>,
    nfe: NfeCounter,
}

impl ToyModel {
    pub fn new(seed: u64, m: usize, t_total: usize, cond: MixtureSpec) -> Result<Self> {
        if m == 0 || t_total == 0 {
            return Err(Error::validation(
                "toy model needs m >= 1 and at least one step",
            ));
        }
        Ok(ToyModel {
            states: init_candidates(seed, m, cond.dim()),
            times: make_timesteps(t_total),
            cond,
            nfe: NfeCounter::new(),
        })
    }

    pub fn condition(&self) -> &MixtureSpec {
        &self.cond
    }

    pub fn state(&self, candidate: usize) -> &FlowState {
        &self.states[candidate]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

impl crate::engine::StepModel for ToyModel {
    fn pool_size(&self) -> usize {
        self.states.len()
    }

    fn advance(&mut self, step: usize, live: &[usize]) -> Result<Vec<FeatureVec>> {
        let t_next = *self
            .times
            .get(step + 1)
            .ok_or_else(|| Error::validation(format!("step {step} is past the last step")))?;
        let mut previews = Vec::with_capacity(live.len());
        for &id in live {
            let state = self
                .states
                .get(id)
                .ok_or_else(|| Error::validation(format!("unknown candidate {id}")))?;
            if state.t != self.times[step] {
                return Err(Error::validation(format!(
                    "candidate {id} is at t = {}, not at step {step}",
                    state.t
                )));
            }
            let out = denoise_step(state, t_next, &self.cond, &self.nfe)?;
            self.states[id] = out.next;
            previews.push(out.preview);
        }
        Ok(previews)
    }

    fn nfe(&self) -> u64 {
        self.nfe.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::StepModel;
    use alloc::vec;

    fn single(mu: f64, sigma: f64) -> MixtureSpec {
        MixtureSpec::new(vec![1.0], vec![vec![mu]], sigma).unwrap()
    }

    #[test]
    fn timestep_grid() {
        assert_eq!(make_timesteps(1), vec![1.0, 0.0]);
        assert_eq!(make_timesteps(4), vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        let g = make_timesteps(7);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[7], 0.0);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn latents_are_deterministic_and_prefix_stable() {
        let a = init_candidates(9, 4, 3);
        let b = init_candidates(9, 8, 3);
        assert_eq!(a, init_candidates(9, 4, 3));
        assert_eq!(&b[..4], &a[..]);
        assert_ne!(init_candidates(10, 4, 3), a);
        assert!(a.iter().all(|s| s.t == 1.0));
    }

    #[test]
    fn latent_coordinates_are_centred() {
        let pool = init_candidates(3, 100_000, 2);
        for c in 0..2 {
            let mean: f64 = pool.iter().map(|s| s.x[c]).sum::<f64>() / pool.len() as f64;
            assert!(mean.abs() < 0.02, "coordinate {c} mean {mean}");
        }
    }

    /// Posterior mean of x_0 for a single 1-d Gaussian by brute quadrature
    /// of the unnormalized posterior `N(x0; mu, s^2) N(xt; (1-t) x0, t^2)`.
    fn quadrature_posterior_mean(mu: f64, sigma: f64, t: f64, xt: f64) -> f64 {
        let (lo, hi, steps) = (mu - 12.0 * sigma, mu + 12.0 * sigma, 200_000);
        let h = (hi - lo) / steps as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..=steps {
            let x0 = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            let prior = (-(x0 - mu).powi(2) / (2.0 * sigma * sigma)).exp();
            let lik = (-(xt - (1.0 - t) * x0).powi(2) / (2.0 * t * t)).exp();
            num += w * x0 * prior * lik;
            den += w * prior * lik;
        }
        num / den
    }

    #[test]
    fn single_gaussian_posterior_mean() {
        let p = posterior_mean(&FeatureVec::from_raw(vec![1.0]), 0.5, &single(2.0, 1.0)).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12);
        assert!((quadrature_posterior_mean(2.0, 1.0, 0.5, 1.0) - 2.0).abs() < 1e-9);
        for &(t, xt) in &[(0.2, -0.7), (0.8, 3.1), (0.05, 2.4)] {
            let p = posterior_mean(&FeatureVec::from_raw(vec![xt]), t, &single(2.0, 0.7)).unwrap();
            let q = quadrature_posterior_mean(2.0, 0.7, t, xt);
            assert!((p[0] - q).abs() < 1e-8, "t={t}: {} vs {q}", p[0]);
        }
    }

    #[test]
    fn symmetric_mixture_at_pure_noise() {
        let cond =
            MixtureSpec::new(vec![0.5, 0.5], vec![vec![3.0, -1.0], vec![-3.0, 1.0]], 0.5).unwrap();
        let p = posterior_mean(&FeatureVec::from_raw(vec![0.0, 0.0]), 1.0, &cond).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn preview_approaches_latent_near_zero() {
        let x = FeatureVec::from_raw(vec![0.37]);
        let p = posterior_mean(&x, 1e-9, &single(5.0, 1.0)).unwrap();
        assert!((p[0] - 0.37).abs() < 1e-6);
    }

    #[test]
    fn posterior_mean_domain() {
        let x = FeatureVec::from_raw(vec![0.0]);
        assert!(matches!(
            posterior_mean(&x, 0.0, &single(0.0, 1.0)),
            Err(Error::Domain(_))
        ));
        assert!(posterior_mean(&x, 1.5, &single(0.0, 1.0)).is_err());
    }

    #[test]
    fn last_step_lands_on_preview() {
        let counter = NfeCounter::new();
        let state = FlowState {
            x: FeatureVec::from_raw(vec![0.3, -2.0]),
            t: 0.25,
            candidate_id: 0,
        };
        let cond = MixtureSpec::four_corners(3.0, 0.5).unwrap();
        let out = denoise_step(&state, 0.0, &cond, &counter).unwrap();
        assert_eq!(out.next.x, out.preview);
        assert_eq!(out.next.t, 0.0);
        assert_eq!(counter.get(), 1);
    }

    #[test]
    fn zero_velocity_keeps_latent() {
        // at the mean of a single component with sigma = 1 the preview equals x
        let counter = NfeCounter::new();
        let cond = MixtureSpec::new(vec![1.0], vec![vec![0.0]], 1.0).unwrap();
        let state = FlowState {
            x: FeatureVec::from_raw(vec![0.0]),
            t: 0.5,
            candidate_id: 3,
        };
        let out = denoise_step(&state, 0.25, &cond, &counter).unwrap();
        assert_eq!(out.next.x, state.x);
        assert_eq!(out.next.candidate_id, 3);
    }

    #[test]
    fn step_must_move_backwards() {
        let counter = NfeCounter::new();
        let cond = single(0.0, 1.0);
        let state = FlowState {
            x: FeatureVec::from_raw(vec![0.0]),
            t: 0.5,
            candidate_id: 0,
        };
        assert!(denoise_step(&state, 0.5, &cond, &counter).is_err());
        assert!(denoise_step(&state, -0.1, &cond, &counter).is_err());
        assert_eq!(counter.get(), 0);
    }

    #[test]
    fn single_gaussian_flow_recovers_covariance() {
        let cond = MixtureSpec::new(vec![1.0], vec![vec![0.0, 0.0]], 1.0).unwrap();
        let n = 10_000;
        let t_total = 64;
        let mut model = ToyModel::new(21, n, t_total, cond).unwrap();
        let live: Vec<usize> = (0..n).collect();
        let mut last = Vec::new();
        for step in 0..t_total {
            last = model.advance(step, &live).unwrap();
        }
        assert_eq!(model.nfe(), (n * t_total) as u64);
        let mut cov = [[0.0; 2]; 2];
        for x in &last {
            for a in 0..2 {
                for b in 0..2 {
                    cov[a][b] += x[a] * x[b] / n as f64;
                }
            }
        }
        assert!((cov[0][0] - 1.0).abs() < 0.05, "{cov:?}");
        assert!((cov[1][1] - 1.0).abs() < 0.05, "{cov:?}");
        assert!(cov[0][1].abs() < 0.05, "{cov:?}");
    }

    #[test]
    fn mode_occupancy_matches_weights() {
        let cond = MixtureSpec::new(
            vec![0.5, 0.3, 0.2],
            vec![vec![-10.0, 0.0], vec![10.0, 0.0], vec![0.0, 10.0]],
            0.5,
        )
        .unwrap();
        let n = 10_000;
        // Euler bias visibly shifts occupancy at 20 steps; it is gone by 100
        let t_total = 100;
        let mut model = ToyModel::new(4, n, t_total, cond.clone()).unwrap();
        let live: Vec<usize> = (0..n).collect();
        let mut finals = Vec::new();
        for step in 0..t_total {
            finals = model.advance(step, &live).unwrap();
        }
        let mut counts = [0usize; 3];
        for x in &finals {
            counts[crate::scores::nearest_mode(x, &cond)] += 1;
        }
        for (c, &w) in cond.weights().iter().enumerate() {
            let p = counts[c] as f64 / n as f64;
            let se = (w * (1.0 - w) / n as f64).sqrt();
            assert!((p - w).abs() < 3.0 * se, "component {c}: {p} vs {w}");
        }
    }

    #[test]
    fn mixture_validation() {
        assert!(MixtureSpec::new(vec![], vec![], 1.0).is_err());
        assert!(MixtureSpec::new(vec![0.5, 0.4], vec![vec![0.0], vec![1.0]], 1.0).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![vec![0.0]], 0.0).is_err());
        assert!(MixtureSpec::new(vec![0.5, 0.5], vec![vec![0.0], vec![1.0, 2.0]], 1.0).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![vec![f64::NAN]], 1.0).is_err());
        assert!(MixtureSpec::new(vec![1.0], vec![vec![]], 1.0).is_err());
    }
}
