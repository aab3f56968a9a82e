//! Estimators of the mixture parameters, of the symmetric component's
//! distribution function and density, and jackknife standard errors.

use crate::contrast::{contrast_p2, LambdaContrast};
use crate::empirical::{Bandwidth, Ecdf, Kde, Sample};
use crate::error::{Error, Result};
use crate::model::{
    apply_a_inv, check_grid, trapezoid, Curve, ParamSpace, SeriesTruncation, Theta,
};
use crate::optimize::{
    default_starts, minimize_1d, minimize_box, ActiveBound, OptimConfig, OptimResult,
};
use crate::par;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// locations known, only λ estimated
    P1,
    /// λ, μ₁ and μ₂ estimated
    P2,
    /// Gaussian maximum likelihood baseline
    Em,
}

/// Optimiser summary carried by a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_iters: usize,
    pub n_evals: usize,
    pub converged: bool,
    pub start_index: usize,
    pub active_bounds: Vec<ActiveBound>,
}

impl From<&OptimResult> for Diagnostics {
    fn from(r: &OptimResult) -> Self {
        Self {
            n_iters: r.n_iters,
            n_evals: r.n_evals,
            converged: r.converged,
            start_index: r.start_index,
            active_bounds: r.active_bounds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub problem: Problem,
    pub theta: Theta,
    pub contrast_at_opt: f64,
    pub diagnostics: Diagnostics,
    /// Jackknife standard errors, in the order of [`FitResult::estimates`].
    pub se: Option<Vec<f64>>,
}

impl FitResult {
    /// The estimated coordinates: `[λ]` for P1, `[λ, μ₁, μ₂]` otherwise.
    pub fn estimates(&self) -> Vec<f64> {
        match self.problem {
            Problem::P1 => vec![self.theta.lambda],
            _ => self.theta.to_array().to_vec(),
        }
    }
}

/// `λ̄ₙ = (μ₂ − X̄)/(μ₂ − μ₁)` clipped to `[0, 1/2 − d]`.
pub fn moment_lambda(sample: &Sample, mu1: f64, mu2: f64, space: &ParamSpace) -> f64 {
    let raw = (mu2 - sample.mean()) / (mu2 - mu1);
    if raw.is_nan() {
        return 0.0;
    }
    raw.clamp(0.0, space.lambda_max())
}

/// Problem (P1): `λ̂ₙ = argmin_{λ ∈ [0, 1/2 − d]} K(λ; Ĝₙ)` with known locations.
pub fn fit_lambda(
    sample: &Sample,
    mu1: f64,
    mu2: f64,
    space: &ParamSpace,
    cfg: &OptimConfig,
) -> Result<FitResult> {
    Theta::new(0.0, mu1, mu2)?;
    let criterion = LambdaContrast::new(sample, mu1, mu2)?;
    let x0 = moment_lambda(sample, mu1, mu2, space);
    let r = minimize_1d(
        |l| {
            let cv = criterion.eval(l);
            (cv.value, cv.gradient[0])
        },
        0.0,
        space.lambda_max(),
        x0,
        cfg,
    )?;
    Ok(FitResult {
        problem: Problem::P1,
        theta: Theta::new(r.x_opt[0], mu1, mu2)?,
        contrast_at_opt: r.f_opt,
        diagnostics: Diagnostics::from(&r),
        se: None,
    })
}

/// Problem (P2): `θ̂ₙ = argmin_{θ ∈ Θ} K_r(θ; Ĝₙ)` by multi-start projected BFGS.
pub fn fit_theta(
    sample: &Sample,
    space: &ParamSpace,
    b: &Bandwidth,
    cfg: &OptimConfig,
) -> Result<FitResult> {
    space.validate()?;
    let starts: Vec<Vec<f64>> = default_starts(space, sample, cfg.n_starts)
        .into_iter()
        .map(|s| s.to_vec())
        .collect();
    let objective = |x: &[f64]| {
        let theta = Theta {
            lambda: x[0],
            mu1: x[1],
            mu2: x[2],
        };
        let cv = contrast_p2(&theta, sample, b);
        (cv.value, cv.gradient)
    };
    let r = minimize_box(objective, &space.lower(), &space.upper(), &starts, cfg)?;
    Ok(FitResult {
        problem: Problem::P2,
        theta: Theta::from_slice(&r.x_opt)?,
        contrast_at_opt: r.f_opt,
        diagnostics: Diagnostics::from(&r),
        se: None,
    })
}

/// [`fit_theta`] over the two data-driven boxes of [`ParamSpace::from_data`]
/// (minority component left or right), keeping the lower contrast.
pub fn fit_theta_default(
    sample: &Sample,
    d: f64,
    b: &Bandwidth,
    cfg: &OptimConfig,
) -> Result<(FitResult, ParamSpace)> {
    let left = ParamSpace::from_data(sample.values(), d, true)?;
    let right = ParamSpace::from_data(sample.values(), d, false)?;
    let fl = fit_theta(sample, &left, b, cfg)?;
    let fr = fit_theta(sample, &right, b, cfg)?;
    if fr.contrast_at_opt < fl.contrast_at_opt {
        Ok((fr, right))
    } else {
        Ok((fl, left))
    }
}

/// Grid of `points` abscissae symmetric about 0 spanning `±(R + 3b)`, where
/// `R` is the largest distance from an observation to the mixture mean.
pub fn default_grid(sample: &Sample, theta: &Theta, b: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidGrid("need at least 2 grid points".into()));
    }
    let centre = theta.mixture_mean();
    let r = sample
        .values()
        .iter()
        .map(|v| (v - centre).abs())
        .fold(0.0, f64::max);
    let half = r + 3.0 * b;
    let m = (points - 1) as f64;
    let mut grid = vec![0.0; points];
    for k in 0..points.div_ceil(2) {
        let x = half * (m - 2.0 * k as f64) / m;
        grid[points - 1 - k] = x;
        grid[k] = -x;
    }
    Ok(grid)
}

/// `F̂ₙ = ½(I + S_r) A_θ⁻¹ Ĝₙ` on `grid`.
///
/// Values at `x < 0` are computed as `1 − F̂ₙ(−x)`, so `F̂ₙ(x) + F̂ₙ(−x) = 1`
/// holds exactly for mirrored grid points.
pub fn estimate_cdf(
    sample: &Sample,
    theta: &Theta,
    grid: &[f64],
    trunc: &SeriesTruncation,
) -> Result<Curve> {
    check_grid(grid)?;
    let g = Ecdf(sample);
    let inverted = |x: f64| apply_a_inv(theta, &g, x, trunc);
    let ordinates = par::map_range(grid.len(), |k| {
        let x = grid[k];
        let t = x.abs();
        let v = 0.5 * (inverted(t) + (1.0 - inverted(-t)));
        if x < 0.0 {
            1.0 - v
        } else {
            v
        }
    });
    Curve::new(grid.to_vec(), ordinates)
}

/// Density estimate `f̃ₙ` with the pieces it is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// `f̃ₙ = f*ₙ/sₙ`
    pub curve: Curve,
    /// `f̂ₙ = ½(I + S_d) A_θ⁻¹ ĝₙ` before projection
    pub unprojected: Curve,
    /// `f*ₙ = max(f̂ₙ, 0)`
    pub projection: Curve,
    /// `sₙ = ∫ f*ₙ` (trapezoid rule)
    pub normalization: f64,
    pub projected: bool,
}

/// `f̂ₙ = ½(I + S_d) A_θ⁻¹ ĝₙ`, projected onto nonnegative functions and
/// renormalised to integrate to one over `grid`.
pub fn estimate_density(
    sample: &Sample,
    theta: &Theta,
    b: &Bandwidth,
    grid: &[f64],
    trunc: &SeriesTruncation,
) -> Result<DensityEstimate> {
    check_grid(grid)?;
    let g = Kde {
        sample,
        bandwidth: *b,
    };
    let raw = par::map_range(grid.len(), |k| {
        let t = grid[k].abs();
        0.5 * (apply_a_inv(theta, &g, t, trunc) + apply_a_inv(theta, &g, -t, trunc))
    });
    let positive: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let s = trapezoid(grid, &positive);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateDensity(s));
    }
    let normalized: Vec<f64> = positive.iter().map(|v| v / s).collect();
    Ok(DensityEstimate {
        curve: Curve::new(grid.to_vec(), normalized)?,
        unprojected: Curve::new(grid.to_vec(), raw)?,
        projection: Curve::new(grid.to_vec(), positive)?,
        normalization: s,
        projected: true,
    })
}

/// Reconstructed mixture density `λ f̃(x − μ₁) + (1 − λ) f̃(x − μ₂)` on `grid`,
/// with `f̃` linearly interpolated (and zero off its grid).
pub fn reconstructed_density(density: &Curve, theta: &Theta, grid: &[f64]) -> Result<Curve> {
    check_grid(grid)?;
    let ys = grid
        .iter()
        .map(|&x| {
            theta.lambda * density.interpolate(x - theta.mu1)
                + (1.0 - theta.lambda) * density.interpolate(x - theta.mu2)
        })
        .collect();
    Curve::new(grid.to_vec(), ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackknifeResult {
    pub se: Vec<f64>,
    /// Leave-one-out fits that returned an error.
    pub failures: usize,
    /// Set when more than 1% of the leave-one-out fits failed.
    pub warning: bool,
}

/// Leave-one-out jackknife standard errors
/// `SE_j = sqrt(((m−1)/m) Σᵢ (θ̂₍ᵢ₎ⱼ − θ̄ⱼ)²)` over the `m` successful fits.
pub fn jackknife_se<F>(sample: &Sample, fit_fn: F) -> Result<JackknifeResult>
where
    F: Fn(&Sample) -> Result<Vec<f64>> + Sync,
{
    let n = sample.n();
    if n < 3 {
        return Err(Error::InvalidSample(format!(
            "jackknife needs n >= 3, got {n}"
        )));
    }
    let fits = par::map_tasks(n, |i| sample.without(i).and_then(|s| fit_fn(&s)));
    let ok: Vec<&Vec<f64>> = fits.iter().filter_map(|f| f.as_ref().ok()).collect();
    let failures = n - ok.len();
    if ok.len() < 2 {
        return Err(Error::Estimation(format!(
            "only {} of {n} leave-one-out fits succeeded",
            ok.len()
        )));
    }
    let dim = ok[0].len();
    if ok.iter().any(|v| v.len() != dim) {
        return Err(Error::Estimation(
            "leave-one-out fits differ in dimension".into(),
        ));
    }
    let m = ok.len() as f64;
    let se = (0..dim)
        .map(|j| {
            // centred on the first estimate so identical estimates give exactly zero
            let pivot = ok[0][j];
            let mean = ok.iter().map(|v| v[j] - pivot).sum::<f64>() / m;
            let ss: f64 = ok.iter().map(|v| (v[j] - pivot - mean).powi(2)).sum();
            ((m - 1.0) / m * ss).sqrt()
        })
        .collect();
    Ok(JackknifeResult {
        se,
        failures,
        warning: failures * 100 > n,
    })
}
