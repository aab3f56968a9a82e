//! Parameter types and the mixing/symmetry operator algebra.
//!
//! For `θ = (λ, μ₁, μ₂)` and `η = μ₂ − μ₁` the mixing operator sends a
//! function `h` to `λ·h(· − μ₁) + (1 − λ)·h(· − μ₂)`. For `λ < 1/2` it has the
//! Neumann-series inverse
//!
//! ```text
//! A⁻¹h(x) = 1/(1−λ) · Σ_{k≥0} (−λ/(1−λ))^k · h(x + μ₂ + kη)
//! ```
//!
//! which is truncated according to a [`SeriesTruncation`]. All operators act on
//! anything implementing [`RealFn`], so empirical, smoothed and analytic
//! functions share one code path.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A real function that can be queried pointwise.
pub trait RealFn: Sync {
    fn eval(&self, x: f64) -> f64;
}

impl<F> RealFn for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Euclidean parameter `(λ, μ₁, μ₂)` of the two-component location mixture.
///
/// `λ` is the weight of the component centred at `μ₁` and is kept in
/// `[0, 1/2)`; a parameter with `λ > 1/2` describes the same model as
/// `(1 − λ, μ₂, μ₁)` and can be brought into this form with
/// [`Theta::canonical`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Theta {
    pub fn new(lambda: f64, mu1: f64, mu2: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu1.is_finite() && mu2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite parameter ({lambda}, {mu1}, {mu2})"
            )));
        }
        if !(0.0..0.5).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} outside [0, 1/2)"
            )));
        }
        if mu1 == mu2 {
            return Err(Error::InvalidParameter(format!(
                "mu1 = mu2 = {mu1}: locations must differ"
            )));
        }
        Ok(Self { lambda, mu1, mu2 })
    }

    /// Relabels `(λ, μ₁, μ₂)` with `λ ∈ (1/2, 1]` as `(1 − λ, μ₂, μ₁)`.
    pub fn canonical(lambda: f64, mu1: f64, mu2: f64) -> Result<Self> {
        if lambda > 0.5 {
            Self::new(1.0 - lambda, mu2, mu1)
        } else {
            Self::new(lambda, mu1, mu2)
        }
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [l, m1, m2] => Self::new(*l, *m1, *m2),
            _ => Err(Error::InvalidParameter(format!(
                "expected 3 components, got {}",
                v.len()
            ))),
        }
    }

    /// `η = μ₂ − μ₁`.
    pub fn eta(&self) -> f64 {
        self.mu2 - self.mu1
    }

    /// Ratio `−λ/(1−λ)` of the inverse series.
    pub fn ratio(&self) -> f64 {
        self.lambda / (self.lambda - 1.0)
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.lambda, self.mu1, self.mu2]
    }

    /// Mean of the mixture when the symmetric component is centred at 0.
    pub fn mixture_mean(&self) -> f64 {
        self.lambda * self.mu1 + (1.0 - self.lambda) * self.mu2
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            lambda: self.lambda,
            mu1: self.mu1 + c,
            mu2: self.mu2 + c,
        }
    }
}

/// Compact feasible set `[0, 1/2 − d] × [μ₁ box] × [μ₂ box]`.
///
/// The two location boxes are disjoint with a gap of at least
/// `min_separation`, so every feasible point stays away from `μ₁ = μ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub d: f64,
    pub mu1_lo: f64,
    pub mu1_hi: f64,
    pub mu2_lo: f64,
    pub mu2_hi: f64,
    pub min_separation: f64,
}

impl ParamSpace {
    pub fn new(d: f64, mu1: (f64, f64), mu2: (f64, f64), min_separation: f64) -> Result<Self> {
        let space = Self {
            d,
            mu1_lo: mu1.0,
            mu1_hi: mu1.1,
            mu2_lo: mu2.0,
            mu2_hi: mu2.1,
            min_separation,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d,
            self.mu1_lo,
            self.mu1_hi,
            self.mu2_lo,
            self.mu2_hi,
            self.min_separation,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite bound".into()));
        }
        if !(self.d > 0.0 && self.d < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "margin d = {} outside (0, 1/2)",
                self.d
            )));
        }
        // A single-point box pins a known location.
        if !(self.mu1_lo <= self.mu1_hi && self.mu2_lo <= self.mu2_hi) {
            return Err(Error::InvalidParameter("empty location box".into()));
        }
        if self.min_separation <= 0.0 {
            return Err(Error::InvalidParameter(
                "min_separation must be positive".into(),
            ));
        }
        let left_gap = self.mu2_lo - self.mu1_hi;
        let right_gap = self.mu1_lo - self.mu2_hi;
        if left_gap < self.min_separation && right_gap < self.min_separation {
            return Err(Error::InvalidParameter(format!(
                "location boxes are closer than min_separation = {}",
                self.min_separation
            )));
        }
        Ok(())
    }

    pub fn lambda_max(&self) -> f64 {
        0.5 - self.d
    }

    pub fn lower(&self) -> [f64; 3] {
        [0.0, self.mu1_lo, self.mu2_lo]
    }

    pub fn upper(&self) -> [f64; 3] {
        [self.lambda_max(), self.mu1_hi, self.mu2_hi]
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        theta.lambda >= 0.0
            && theta.lambda <= self.lambda_max()
            && (self.mu1_lo..=self.mu1_hi).contains(&theta.mu1)
            && (self.mu2_lo..=self.mu2_hi).contains(&theta.mu2)
            && (theta.mu2 - theta.mu1).abs() >= self.min_separation
    }

    /// Clamps `v` componentwise into the box.
    pub fn clamp(&self, v: [f64; 3]) -> [f64; 3] {
        let lo = self.lower();
        let hi = self.upper();
        [
            v[0].clamp(lo[0], hi[0]),
            v[1].clamp(lo[1], hi[1]),
            v[2].clamp(lo[2], hi[2]),
        ]
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            mu1_lo: self.mu1_lo + c,
            mu1_hi: self.mu1_hi + c,
            mu2_lo: self.mu2_lo + c,
            mu2_hi: self.mu2_hi + c,
            ..*self
        }
    }

    /// Default box derived from data: the minority location `μ₁` ranges over
    /// the lower part of the sample range and `μ₂` over the upper part (or the
    /// reverse when `minority_left` is false). The split point is the sample
    /// midrange, and both boxes extend one standard deviation beyond the data.
    pub fn from_data(values: &[f64], d: f64, minority_left: bool) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSample("need at least 2 values".into()));
        }
        let n = values.len() as f64;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(hi > lo) {
            return Err(Error::InvalidSample("all values are equal".into()));
        }
        let range = hi - lo;
        let sep = 0.1 * range;
        let split = 0.5 * (lo + hi);
        let low_box = (lo - sd, split - 0.5 * sep);
        let high_box = (split + 0.5 * sep, hi + sd);
        // the rounded gap, so validation sees exactly this separation
        let sep = high_box.0 - low_box.1;
        if minority_left {
            Self::new(d, low_box, high_box, sep)
        } else {
            Self::new(d, high_box, low_box, sep)
        }
    }
}

/// A function tabulated on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    abscissae: Vec<f64>,
    ordinates: Vec<f64>,
}

impl Curve {
    pub fn new(abscissae: Vec<f64>, ordinates: Vec<f64>) -> Result<Self> {
        if abscissae.len() != ordinates.len() {
            return Err(Error::InvalidGrid(format!(
                "{} abscissae but {} ordinates",
                abscissae.len(),
                ordinates.len()
            )));
        }
        check_grid(&abscissae)?;
        Ok(Self {
            abscissae,
            ordinates,
        })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.abscissae
            .iter()
            .copied()
            .zip(self.ordinates.iter().copied())
    }

    /// Trapezoid rule over the grid.
    pub fn trapezoid(&self) -> f64 {
        trapezoid(&self.abscissae, &self.ordinates)
    }

    /// Trapezoid approximation of `∫|curve − h|`.
    pub fn l1_distance(&self, h: &impl RealFn) -> f64 {
        let diffs: Vec<f64> = self.iter().map(|(x, y)| (y - h.eval(x)).abs()).collect();
        trapezoid(&self.abscissae, &diffs)
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let xs = &self.abscissae;
        if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
            return 0.0;
        }
        let i = xs.partition_point(|&v| v <= x);
        if i == xs.len() {
            return self.ordinates[xs.len() - 1];
        }
        let (x0, x1) = (xs[i - 1], xs[i]);
        let (y0, y1) = (self.ordinates[i - 1], self.ordinates[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("non-finite abscissa".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "abscissae must be strictly increasing".into(),
        ));
    }
    Ok(())
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Truncation rule for the inverse series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruncation {
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

impl SeriesTruncation {
    pub fn new(tol: f64, max_terms: usize) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) || max_terms == 0 {
            return Err(Error::InvalidParameter(format!(
                "bad truncation tol = {tol}, max_terms = {max_terms}"
            )));
        }
        Ok(Self { tol, max_terms })
    }

    /// Smallest `K` with `(λ/(1−λ))^K ≤ tol`, capped at `max_terms`; 1 at `λ = 0`.
    pub fn terms(&self, lambda: f64) -> usize {
        if lambda <= 0.0 {
            return 1;
        }
        let r = lambda / (1.0 - lambda);
        let k = (self.tol.ln() / r.ln()).ceil();
        if k.is_finite() && k >= 1.0 {
            (k as usize).min(self.max_terms)
        } else {
            self.max_terms
        }
    }
}

/// `A_θ h(x) = λ h(x − μ₁) + (1 − λ) h(x − μ₂)`.
pub fn apply_a(theta: &Theta, h: &impl RealFn, x: f64) -> f64 {
    if theta.lambda == 0.0 {
        return h.eval(x - theta.mu2);
    }
    theta.lambda * h.eval(x - theta.mu1) + (1.0 - theta.lambda) * h.eval(x - theta.mu2)
}

/// Truncated `A_θ⁻¹ h(x)`.
pub fn apply_a_inv(theta: &Theta, h: &impl RealFn, x: f64, trunc: &SeriesTruncation) -> f64 {
    let terms = trunc.terms(theta.lambda);
    let ratio = theta.ratio();
    let eta = theta.eta();
    let start = x + theta.mu2;
    let mut weight = 1.0;
    let mut sum = 0.0;
    for k in 0..terms {
        sum += weight * h.eval(start + k as f64 * eta);
        weight *= ratio;
    }
    sum / (1.0 - theta.lambda)
}

/// `S_r h(x) = 1 − h(−x)`.
pub fn apply_sr(h: &impl RealFn, x: f64) -> f64 {
    1.0 - h.eval(-x)
}

/// `S_d h(x) = h(−x)`.
pub fn apply_sd(h: &impl RealFn, x: f64) -> f64 {
    h.eval(-x)
}

/// `G_θ(x) = A_θ S_r A_θ⁻¹ G(x)` by direct composition of the truncated series.
pub fn g_theta(theta: &Theta, g: &impl RealFn, x: f64, trunc: &SeriesTruncation) -> f64 {
    let reflected = |y: f64| apply_sr(&|z: f64| apply_a_inv(theta, g, z, trunc), y);
    apply_a(theta, &reflected, x)
}
