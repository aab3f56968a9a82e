//! Estimating criteria built from `G_θ = A_θ S_r A_θ⁻¹ G`.
//!
//! Expanding the composition gives, with `ρ = λ/(λ−1)`, `c = 2μ₁ − x` and
//! `η = μ₂ − μ₁`,
//!
//! ```text
//! G_θ(x) = 1 + ρ·G(c + η) + (2λ−1)/(λ−1)² · Σ_{m≥2} ρ^(m−2) · G(c + mη)
//! ```
//!
//! For the empirical distribution function each observation contributes an
//! indicator that switches on at an integer index, so the series collapses to
//! a geometric tail. For the triangular-kernel smoothed distribution function
//! only the indices where the kernel window straddles the argument are summed
//! explicitly; the rest is again a geometric tail. Both closed forms are
//! checked against [`crate::model::g_theta`] in the tests.
//!
//! The tail coefficient is written as `γ = (2λ−1)/(1−λ)`, which keeps every
//! expression finite at `λ = 0`.

use crate::empirical::{kernel_cdf, kernel_q, smoothed_cdf, Bandwidth, Ecdf, Sample, SmoothedCdf};
use crate::error::{Error, Result};
use crate::model::{g_theta, RealFn, SeriesTruncation, Theta};
use crate::par;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Below this proportion the criterion values come from the series composition.
pub const LAMBDA_FLOOR: f64 = 1e-10;

const MAX_EXPONENT: f64 = 1.0e6;

/// Contrast value with its gradient (length 1 for P1, 3 for P2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Integer index bounds appearing in the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexBounds {
    pub l1: i64,
    pub l2: i64,
}

#[inline]
fn ceil_index(v: f64) -> i64 {
    v.ceil().clamp(-MAX_EXPONENT, MAX_EXPONENT) as i64
}

#[inline]
fn floor_index(v: f64) -> i64 {
    v.floor().clamp(-MAX_EXPONENT, MAX_EXPONENT) as i64
}

/// `L(i, x) = max(1, ⌈(x − 2μ₁ + Xᵢ − η)/η⌉)` for the unsmoothed closed form.
pub fn index_bound(theta: &Theta, xi: f64, x: f64) -> i64 {
    let eta = theta.eta();
    ceil_index((x - 2.0 * theta.mu1 + xi - eta) / eta).max(1)
}

/// `L_k(i, x) = max(1, ⌈(x − 2μ₁ + Xᵢ − η + (−1)^k b)/η⌉)` for `k = 1, 2`.
pub fn index_bounds_smoothed(theta: &Theta, b: f64, xi: f64, x: f64) -> IndexBounds {
    let eta = theta.eta();
    let base = x - 2.0 * theta.mu1 + xi - eta;
    IndexBounds {
        l1: ceil_index((base - b) / eta).max(1),
        l2: ceil_index((base + b) / eta).max(1),
    }
}

/// λ-dependent coefficients and their derivatives.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    /// `ρ = λ/(λ−1)`
    rho: f64,
    drho: f64,
    /// `β = (2λ−1)/(λ−1)²`
    beta: f64,
    dbeta: f64,
    /// `γ = β/(1−ρ) = (2λ−1)/(1−λ)`
    gamma: f64,
    dgamma: f64,
}

impl Coeffs {
    fn new(lambda: f64) -> Self {
        let lm1 = lambda - 1.0;
        Self {
            rho: lambda / lm1,
            drho: -1.0 / (lm1 * lm1),
            beta: (2.0 * lambda - 1.0) / (lm1 * lm1),
            dbeta: -2.0 * lambda / (lm1 * lm1 * lm1),
            gamma: (2.0 * lambda - 1.0) / (1.0 - lambda),
            dgamma: 1.0 / (lm1 * lm1),
        }
    }
}

/// `ρ^e` and `d(ρ^e)/dρ` for `e ≥ 0`.
#[inline]
fn pow_d(rho: f64, e: i64) -> (f64, f64) {
    match e {
        0 => (1.0, 0.0),
        _ => {
            let p = rho.powi((e - 1) as i32);
            (p * rho, e as f64 * p)
        }
    }
}

/// Indices `m ≥ 1` for which `Xᵢ ≤ c + mη`, encoded for the two signs of `η`.
enum StepRange {
    /// indicator on for `m ≥ start`
    From(i64),
    /// indicator on for `m ≤ end`
    UpTo(i64),
}

#[inline]
fn step_range(xi: f64, c: f64, eta: f64) -> StepRange {
    if eta > 0.0 {
        StepRange::From(ceil_index((xi - c) / eta))
    } else {
        StepRange::UpTo(floor_index((xi - c) / eta))
    }
}

/// Sum of `ρ^(m−2)` over `m ≥ 2` in the step range, as a signed list of powers:
/// the tail is `γ·Σ sign·ρ^e`.
#[inline]
fn tail_powers(range: &StepRange) -> (bool, [(i64, f64); 2], usize) {
    match *range {
        StepRange::From(start) => (start <= 1, [((start.max(2) - 2), 1.0), (0, 0.0)], 1),
        StepRange::UpTo(end) => {
            let first = end >= 1;
            if end >= 2 {
                (first, [(0, 1.0), (end - 1, -1.0)], 2)
            } else {
                (first, [(0, 0.0), (0, 0.0)], 0)
            }
        }
    }
}

/// Closed-form `Ĝ_λ(x) = A_θ S_r A_θ⁻¹ Ĝₙ(x)` and its λ-derivative.
fn ghat_with_grad(theta: &Theta, sample: &Sample, x: f64) -> (f64, f64) {
    let co = Coeffs::new(theta.lambda);
    let eta = theta.eta();
    let c = 2.0 * theta.mu1 - x;
    let mut first = 0usize;
    let mut tail = 0.0;
    let mut dtail = 0.0;
    for &xi in sample.values() {
        let (on, pows, len) = tail_powers(&step_range(xi, c, eta));
        if on {
            first += 1;
        }
        for &(e, w) in &pows[..len] {
            let (p, dp) = pow_d(co.rho, e);
            tail += w * p;
            dtail += w * dp;
        }
    }
    let n = sample.n() as f64;
    let first = first as f64;
    let value = 1.0 + (co.rho * first + co.gamma * tail) / n;
    let grad = (co.drho * first + co.dgamma * tail + co.gamma * dtail * co.drho) / n;
    (value, grad)
}

fn oracle_trunc() -> SeriesTruncation {
    SeriesTruncation {
        tol: 1e-15,
        max_terms: 10_000,
    }
}

/// `Ĝ_λ(x) = A_θ S_r A_θ⁻¹ Ĝₙ(x)` for known locations.
pub fn ghat_lambda(theta: &Theta, sample: &Sample, x: f64) -> f64 {
    if theta.lambda < LAMBDA_FLOOR {
        return g_theta(theta, &Ecdf(sample), x, &oracle_trunc());
    }
    ghat_with_grad(theta, sample, x).0
}

/// Problem (P1) criterion `(1/n) Σᵢ (Ĝ_λ(Xᵢ) − Ĝₙ(Xᵢ))²` with `d/dλ`.
pub fn contrast_p1(theta: &Theta, sample: &Sample) -> ContrastValue {
    LambdaContrast::new(sample, theta.mu1, theta.mu2)
        .expect("theta has distinct locations")
        .eval(theta.lambda)
}

/// The P1 criterion prepared for one sample and fixed locations.
///
/// The integer indices in the closed form do not depend on λ, so they are
/// tabulated once per data point and every evaluation is a polynomial in `ρ`.
#[derive(Debug, Clone)]
pub struct LambdaContrast<'a> {
    sample: &'a Sample,
    mu1: f64,
    mu2: f64,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
struct Row {
    target: f64,
    first: f64,
    powers: Vec<(i32, f64)>,
}

impl<'a> LambdaContrast<'a> {
    pub fn new(sample: &'a Sample, mu1: f64, mu2: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite()) || mu1 == mu2 {
            return Err(Error::InvalidParameter(format!(
                "locations must be finite and distinct, got ({mu1}, {mu2})"
            )));
        }
        let eta = mu2 - mu1;
        let n = sample.n() as f64;
        let rows = par::map_range(sample.n(), |j| {
            let x = sample.values()[j];
            let c = 2.0 * mu1 - x;
            let mut first = 0usize;
            let mut hist: BTreeMap<i64, f64> = BTreeMap::new();
            for &xi in sample.values() {
                let (on, pows, len) = tail_powers(&step_range(xi, c, eta));
                if on {
                    first += 1;
                }
                for &(e, w) in &pows[..len] {
                    *hist.entry(e).or_insert(0.0) += w;
                }
            }
            Row {
                target: sample.count_le(x) as f64 / n,
                first: first as f64,
                powers: hist
                    .into_iter()
                    .filter(|(_, w)| *w != 0.0)
                    .map(|(e, w)| (e as i32, w))
                    .collect(),
            }
        });
        Ok(Self {
            sample,
            mu1,
            mu2,
            rows,
        })
    }

    pub fn eval(&self, lambda: f64) -> ContrastValue {
        let co = Coeffs::new(lambda);
        let n = self.sample.n() as f64;
        let theta = Theta {
            lambda,
            mu1: self.mu1,
            mu2: self.mu2,
        };
        let use_oracle = lambda < LAMBDA_FLOOR;
        let terms = par::map_range(self.rows.len(), |j| {
            let row = &self.rows[j];
            let (mut tail, mut dtail) = (0.0, 0.0);
            for &(e, w) in &row.powers {
                let (p, dp) = pow_d(co.rho, e as i64);
                tail += w * p;
                dtail += w * dp;
            }
            let mut value = 1.0 + (co.rho * row.first + co.gamma * tail) / n;
            if use_oracle {
                value = g_theta(
                    &theta,
                    &Ecdf(self.sample),
                    self.sample.values()[j],
                    &oracle_trunc(),
                );
            }
            let grad = (co.drho * row.first + co.dgamma * tail + co.gamma * dtail * co.drho) / n;
            let diff = value - row.target;
            (diff * diff, 2.0 * diff * grad)
        });
        let values: Vec<f64> = terms.iter().map(|t| t.0).collect();
        let grads: Vec<f64> = terms.iter().map(|t| t.1).collect();
        ContrastValue {
            value: par::compensated_sum(&values) / n,
            gradient: vec![par::compensated_sum(&grads) / n],
        }
    }
}

/// Closed-form `G̃_θ(x) = A_θ S_r A_θ⁻¹ G̃ₙ(x)` with its gradient in `(λ, μ₁, μ₂)`.
fn gtilde_with_grad(theta: &Theta, sample: &Sample, bw: f64, x: f64) -> (f64, [f64; 3]) {
    let co = Coeffs::new(theta.lambda);
    let eta = theta.eta();
    let c = 2.0 * theta.mu1 - x;
    let inv_b = 1.0 / bw;

    let mut value = 0.0;
    let mut grad = [0.0; 3];
    for &xi in sample.values() {
        // m = 1
        let arg1 = (c + eta - xi) * inv_b;
        let q1 = kernel_cdf(arg1);
        let d1 = kernel_q(arg1) * inv_b;
        value += co.rho * q1;
        grad[0] += co.drho * q1;
        grad[1] += co.rho * d1;
        grad[2] += co.rho * d1;

        // m ≥ 2: [partial_lo, partial_hi] explicit, the rest a geometric tail
        let (partial_lo, partial_hi, tail_pows): (i64, i64, [(i64, f64); 2]) = if eta > 0.0 {
            let zero_end = floor_index((xi - c - bw) / eta);
            let full_start = ceil_index((xi - c + bw) / eta).max(2);
            (
                (zero_end + 1).max(2),
                full_start - 1,
                [(full_start - 2, 1.0), (0, 0.0)],
            )
        } else {
            let full_end = floor_index((xi - c + bw) / eta);
            let zero_start = ceil_index((xi - c - bw) / eta);
            let pows = if full_end >= 2 {
                [(0, 1.0), (full_end - 1, -1.0)]
            } else {
                [(0, 0.0), (0, 0.0)]
            };
            ((full_end + 1).max(2), zero_start - 1, pows)
        };

        for &(e, w) in &tail_pows {
            if w != 0.0 {
                let (p, dp) = pow_d(co.rho, e);
                value += co.gamma * w * p;
                grad[0] += w * (co.dgamma * p + co.gamma * dp * co.drho);
            }
        }

        if partial_lo <= partial_hi {
            let (mut p, _) = pow_d(co.rho, partial_lo - 2);
            for m in partial_lo..=partial_hi {
                let j = m - 2;
                let arg = (c + m as f64 * eta - xi) * inv_b;
                let q = kernel_cdf(arg);
                let dq = kernel_q(arg) * inv_b;
                let dp = if j == 0 {
                    0.0
                } else {
                    j as f64 * co.rho.powi((j - 1) as i32)
                };
                value += co.beta * p * q;
                grad[0] += (co.dbeta * p + co.beta * dp * co.drho) * q;
                let bq = co.beta * p * dq;
                grad[1] += bq * (2 - m) as f64;
                grad[2] += bq * m as f64;
                p *= co.rho;
            }
        }
    }
    let n = sample.n() as f64;
    (1.0 + value / n, [grad[0] / n, grad[1] / n, grad[2] / n])
}

/// `G̃_θ(x) = A_θ S_r A_θ⁻¹ G̃ₙ(x)` with `G̃ₙ` the triangular-kernel smoothed ECDF.
pub fn gtilde_theta(theta: &Theta, sample: &Sample, b: &Bandwidth, x: f64) -> f64 {
    if theta.lambda < LAMBDA_FLOOR {
        let g = SmoothedCdf {
            sample,
            bandwidth: *b,
        };
        return g_theta(theta, &g, x, &oracle_trunc());
    }
    gtilde_with_grad(theta, sample, b.value, x).0
}

/// Problem (P2) criterion `(1/n) Σᵢ (G̃_θ(Xᵢ) − G̃ₙ(Xᵢ))²` with its gradient.
///
/// The gradient treats the integer index ranges as locally constant.
pub fn contrast_p2(theta: &Theta, sample: &Sample, b: &Bandwidth) -> ContrastValue {
    let n = sample.n() as f64;
    let use_oracle = theta.lambda < LAMBDA_FLOOR;
    let smoothed = SmoothedCdf {
        sample,
        bandwidth: *b,
    };
    let terms = par::map_range(sample.n(), |j| {
        let x = sample.values()[j];
        let (mut value, grad) = gtilde_with_grad(theta, sample, b.value, x);
        if use_oracle {
            value = g_theta(theta, &smoothed, x, &oracle_trunc());
        }
        let diff = value - smoothed_cdf(sample, b, x);
        (diff * diff, grad.map(|g| 2.0 * diff * g))
    });
    let values: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let gradient = (0..3)
        .map(|k| {
            let g: Vec<f64> = terms.iter().map(|t| t.1[k]).collect();
            par::compensated_sum(&g) / n
        })
        .collect();
    ContrastValue {
        value: par::compensated_sum(&values) / n,
        gradient,
    }
}

/// Population contrast `K(θ; G) = ∫ (G_θ − G)² dG` for an absolutely continuous
/// `G` with density `g`, by composite Simpson quadrature on `[lo, hi]` with
/// `intervals` (even) subintervals and the truncated series for `G_θ`.
pub fn population_contrast(
    theta: &Theta,
    cdf: &impl RealFn,
    density: &impl RealFn,
    (lo, hi): (f64, f64),
    intervals: usize,
    trunc: &SeriesTruncation,
) -> f64 {
    let m = intervals + intervals % 2;
    let h = (hi - lo) / m as f64;
    let terms = par::map_range(m + 1, |k| {
        let x = lo + k as f64 * h;
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let d = g_theta(theta, cdf, x, trunc) - cdf.eval(x);
        w * d * d * density.eval(x)
    });
    par::compensated_sum(&terms) * h / 3.0
}
