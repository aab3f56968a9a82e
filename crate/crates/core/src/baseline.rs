//! Gaussian two-component maximum likelihood by EM, the parametric baseline
//! `λ N(μ₁, σ²) + (1 − λ) N(μ₂, σ²)` with a common σ.

use crate::empirical::Sample;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Responsibility mass below which a component counts as empty.
const DEGENERATE_MASS: f64 = 1e-8;
const MAX_RESTARTS: usize = 3;
/// Slack allowed in the per-iteration ascent check, relative to `1 + |ℓ|`.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub tol_loglik: f64,
    pub max_iters: usize,
    pub sigma: f64,
    pub estimate_sigma: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol_loglik: 1e-9,
            max_iters: 2000,
            sigma: 1.0,
            estimate_sigma: false,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.tol_loglik > 0.0) {
            return Err(Error::InvalidParameter(
                "tol_loglik must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mixture weights and locations. Unlike [`crate::Theta`], `λ = 1/2` and
/// `μ₁ = μ₂` are allowed since the likelihood can be maximised there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl GaussianParams {
    pub fn new(lambda: f64, mu1: f64, mu2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) || !mu1.is_finite() || !mu2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "invalid mixture parameters ({lambda}, {mu1}, {mu2})"
            )));
        }
        Ok(Self { lambda, mu1, mu2 })
    }

    /// Relabels so that `λ ≤ 1/2`, with ties at one half broken by `μ₁ ≤ μ₂`.
    pub fn canonical(self) -> Self {
        let swap = self.lambda > 0.5 || (self.lambda == 0.5 && self.mu1 > self.mu2);
        if swap {
            Self {
                lambda: 1.0 - self.lambda,
                mu1: self.mu2,
                mu2: self.mu1,
            }
        } else {
            self
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            lambda: 1.0 - self.lambda,
            mu1: self.mu2,
            mu2: self.mu1,
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.lambda, self.mu1, self.mu2]
    }
}

impl From<crate::Theta> for GaussianParams {
    fn from(t: crate::Theta) -> Self {
        Self {
            lambda: t.lambda,
            mu1: t.mu1,
            mu2: t.mu2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub params: GaussianParams,
    pub sigma: f64,
    pub loglik: f64,
    /// Log-likelihood at the start and after every iteration of the final run.
    pub loglik_trace: Vec<f64>,
    pub n_iters: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Whether `loglik_trace` never decreased by more than [`MONOTONE_SLACK`].
    pub monotone: bool,
}

/// Log of `λ φ_σ(x − μ₁) + (1 − λ) φ_σ(x − μ₂)`, by log-sum-exp.
fn log_mixture(x: f64, p: &GaussianParams, sigma: f64) -> f64 {
    let c = -0.5 * (2.0 * PI).ln() - sigma.ln();
    let a = log_term(p.lambda, (x - p.mu1) / sigma);
    let b = log_term(1.0 - p.lambda, (x - p.mu2) / sigma);
    let m = a.max(b);
    c + m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_term(weight: f64, z: f64) -> f64 {
    if weight <= 0.0 {
        f64::NEG_INFINITY
    } else {
        weight.ln() - 0.5 * z * z
    }
}

/// `Σᵢ log(λ φ_σ(xᵢ − μ₁) + (1 − λ) φ_σ(xᵢ − μ₂))`.
pub fn loglik(sample: &Sample, params: &GaussianParams, sigma: f64) -> f64 {
    sample
        .values()
        .iter()
        .map(|&x| log_mixture(x, params, sigma))
        .sum()
}

/// Posterior probability of the first component.
fn responsibility(x: f64, p: &GaussianParams, sigma: f64) -> f64 {
    let a = log_term(p.lambda, (x - p.mu1) / sigma);
    let b = log_term(1.0 - p.lambda, (x - p.mu2) / sigma);
    if a == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 / (1.0 + (b - a).exp())
}

enum Run {
    Done(EmFit),
    Degenerate,
}

fn run(sample: &Sample, cfg: &EmConfig, init: GaussianParams, restarts: usize) -> Run {
    let xs = sample.values();
    let n = xs.len() as f64;
    let mut p = init;
    let mut sigma = cfg.sigma;
    let mut ll = loglik(sample, &p, sigma);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut n_iters = 0;
    let mut r = vec![0.0; xs.len()];
    while n_iters < cfg.max_iters {
        for (ri, &x) in r.iter_mut().zip(xs) {
            *ri = responsibility(x, &p, sigma);
        }
        let w1: f64 = r.iter().sum();
        let w2: f64 = r.iter().map(|v| 1.0 - v).sum();
        if w1 < DEGENERATE_MASS || w2 < DEGENERATE_MASS {
            return Run::Degenerate;
        }
        let s1: f64 = r.iter().zip(xs).map(|(ri, x)| ri * x).sum();
        let s2: f64 = r.iter().zip(xs).map(|(ri, x)| (1.0 - ri) * x).sum();
        let lo = sample.min();
        let hi = sample.max();
        let next = GaussianParams {
            lambda: (w1 / n).clamp(0.0, 1.0),
            mu1: (s1 / w1).clamp(lo, hi),
            mu2: (s2 / w2).clamp(lo, hi),
        };
        if cfg.estimate_sigma {
            let ss: f64 = r
                .iter()
                .zip(xs)
                .map(|(ri, x)| ri * (x - next.mu1).powi(2) + (1.0 - ri) * (x - next.mu2).powi(2))
                .sum();
            let s = (ss / n).sqrt();
            if !(s > 0.0) {
                return Run::Degenerate;
            }
            sigma = s;
        }
        p = next;
        n_iters += 1;
        let next_ll = loglik(sample, &p, sigma);
        debug_assert!(
            next_ll >= ll - MONOTONE_SLACK * (1.0 + ll.abs()),
            "EM decreased the log-likelihood: {ll} -> {next_ll}"
        );
        trace.push(next_ll);
        let gain = next_ll - ll;
        ll = next_ll;
        if gain < cfg.tol_loglik {
            converged = true;
            break;
        }
    }
    let monotone = trace
        .windows(2)
        .all(|w| w[1] >= w[0] - MONOTONE_SLACK * (1.0 + w[0].abs()));
    Run::Done(EmFit {
        params: p.canonical(),
        sigma,
        loglik: ll,
        loglik_trace: trace,
        n_iters,
        restarts,
        converged,
        monotone,
    })
}

/// Deterministic perturbation used after a degenerate run: pulls `λ` towards
/// 1/4 and spreads the locations around their midpoint.
fn perturb(init: GaussianParams, sample: &Sample, attempt: usize) -> GaussianParams {
    let spread = sample.std_dev().max(f64::EPSILON) * 0.5 * attempt as f64;
    let mid = 0.5 * (init.mu1 + init.mu2);
    let (a, b) = if init.mu1 <= init.mu2 {
        (-1.0, 1.0)
    } else {
        (1.0, -1.0)
    };
    GaussianParams {
        lambda: 0.5 * (init.lambda + 0.25),
        mu1: (mid + a * spread).clamp(sample.min(), sample.max()),
        mu2: (mid + b * spread).clamp(sample.min(), sample.max()),
    }
}

/// Fits the Gaussian mixture by EM from `init`, restarting from perturbed
/// initial values (at most three times) when a component empties.
pub fn em_fit(sample: &Sample, cfg: &EmConfig, init: GaussianParams) -> Result<EmFit> {
    cfg.validate()?;
    GaussianParams::new(init.lambda, init.mu1, init.mu2)?;
    let mut start = init;
    for attempt in 0..=MAX_RESTARTS {
        match run(sample, cfg, start, attempt) {
            Run::Done(fit) => return Ok(fit),
            Run::Degenerate => start = perturb(init, sample, attempt + 1),
        }
    }
    Err(Error::Estimation(format!(
        "EM hit a degenerate component after {MAX_RESTARTS} restarts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(l: f64, a: f64, b: f64) -> GaussianParams {
        GaussianParams::new(l, a, b).unwrap()
    }

    #[test]
    fn loglik_single_point() {
        let s = Sample::new(vec![2.0, 2.0]).unwrap();
        let v = loglik(&s, &p(0.0, -1.0, 2.0), 1.0) / 2.0;
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn loglik_label_swap() {
        let s = Sample::new(vec![-1.3, 0.2, 0.9, 2.4, 3.0]).unwrap();
        let a = p(0.3, -1.0, 2.0);
        let l1 = loglik(&s, &a, 0.8);
        let l2 = loglik(&s, &a.swapped(), 0.8);
        assert!((l1 - l2).abs() < 1e-13 * l1.abs());
    }

    #[test]
    fn loglik_matches_direct_formula() {
        let s = Sample::new(vec![-0.7, 1.1, 2.5]).unwrap();
        let a = p(0.3, -1.0, 2.0);
        let sigma = 1.3;
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt() / sigma;
        let direct: f64 = s
            .values()
            .iter()
            .map(|&x| (0.3 * phi((x + 1.0) / sigma) + 0.7 * phi((x - 2.0) / sigma)).ln())
            .sum();
        assert!((loglik(&s, &a, sigma) - direct).abs() < 1e-13);
    }

    #[test]
    fn constant_data_is_a_fixed_point() {
        let s = Sample::new(vec![1.5; 10]).unwrap();
        let fit = em_fit(&s, &EmConfig::default(), p(0.25, 1.5, 1.5)).unwrap();
        assert_eq!(fit.n_iters, 1);
        assert!(fit.converged);
        assert_eq!(fit.params.mu1, 1.5);
        assert_eq!(fit.params.mu2, 1.5);
        assert!((fit.params.lambda - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ascent_and_bounds() {
        let xs: Vec<f64> = (0..60)
            .map(|i| {
                let u = (i as f64 + 0.5) / 60.0;
                let z = crate::normal::quantile(u);
                if i % 4 == 0 {
                    z - 1.0
                } else {
                    z + 2.0
                }
            })
            .collect();
        let s = Sample::new(xs).unwrap();
        for init in [p(0.4, 0.0, 1.0), p(0.1, 3.0, -2.0), p(0.7, -1.0, 2.0)] {
            for estimate_sigma in [false, true] {
                let cfg = EmConfig {
                    estimate_sigma,
                    ..EmConfig::default()
                };
                let fit = em_fit(&s, &cfg, init).unwrap();
                assert!(fit.monotone);
                assert!(fit.loglik >= loglik(&s, &init, 1.0) || estimate_sigma);
                assert!(fit.params.lambda <= 0.5);
                for m in [fit.params.mu1, fit.params.mu2] {
                    assert!(m >= s.min() && m <= s.max());
                }
            }
        }
    }

    #[test]
    fn two_points_small_sigma() {
        let s = Sample::new(vec![-1.0, 3.0]).unwrap();
        let cfg = EmConfig {
            sigma: 0.1,
            ..EmConfig::default()
        };
        let fit = em_fit(&s, &cfg, p(0.3, -0.5, 2.0)).unwrap();
        assert!((fit.params.mu1 + 1.0).abs() < 1e-6);
        assert!((fit.params.mu2 - 3.0).abs() < 1e-6);
        assert!((fit.params.lambda - 0.5).abs() < 1e-6);
    }

    #[test]
    fn canonical_labels() {
        let c = p(0.7, 2.0, -1.0).canonical();
        assert_eq!(c.to_array(), [1.0 - 0.7, -1.0, 2.0]);
        let c = p(0.5, 2.0, -1.0).canonical();
        assert_eq!(c.to_array(), [0.5, -1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_config() {
        let s = Sample::new(vec![0.0, 1.0]).unwrap();
        let bad = EmConfig {
            sigma: 0.0,
            ..EmConfig::default()
        };
        assert!(em_fit(&s, &bad, p(0.3, 0.0, 1.0)).is_err());
        assert!(GaussianParams::new(1.2, 0.0, 1.0).is_err());
    }
}
