//! Box-constrained quasi-Newton minimisation.
//!
//! Projected BFGS: variables sitting on a bound with the gradient pushing
//! outward are frozen, the inverse-Hessian approximation acts on the remaining
//! free variables and is reset whenever the free set changes. Steps are capped
//! at the first bound crossing and found by a strong-Wolfe line search with
//! cubic interpolation.

use crate::empirical::Sample;
use crate::error::{Error, Result};
use crate::estimate::moment_lambda;
use crate::model::ParamSpace;
use crate::par;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iters: usize,
    pub n_starts: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-7,
            step_tol: 1e-10,
            max_iters: 500,
            n_starts: 8,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if self.max_iters == 0 || self.n_starts == 0 {
            return Err(Error::InvalidParameter(
                "max_iters and n_starts must be at least 1".into(),
            ));
        }
        if !(self.grad_tol > 0.0 && self.step_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Starting points for the (P2) search: a moment-style point followed by a
/// Halton sequence over the box.
///
/// The moment-style point takes `μ₁`, `μ₂` from the sample quartiles (the
/// lower quartile goes to whichever location box lies lower), clamps them into
/// their boxes and sets `λ` to the clipped moment estimate for those
/// locations.
pub fn default_starts(space: &ParamSpace, sample: &Sample, n_starts: usize) -> Vec<[f64; 3]> {
    let n_starts = n_starts.max(1);
    let (q_lo, q_hi) = (sample.quantile(0.25), sample.quantile(0.75));
    let mu1_left = space.mu1_hi <= space.mu2_lo;
    let (m1, m2) = if mu1_left { (q_lo, q_hi) } else { (q_hi, q_lo) };
    let m1 = m1.clamp(space.mu1_lo, space.mu1_hi);
    let m2 = m2.clamp(space.mu2_lo, space.mu2_hi);
    let lambda = moment_lambda(sample, m1, m2, space);
    let mut starts = vec![[lambda, m1, m2]];
    let lo = space.lower();
    let hi = space.upper();
    for k in 1..n_starts {
        let u = [halton(k, 2), halton(k, 3), halton(k, 5)];
        starts.push(std::array::from_fn(|i| lo[i] + u[i] * (hi[i] - lo[i])));
    }
    starts
}

/// Radical inverse of `k` in base `base`.
fn halton(mut k: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k % base) as f64;
        k /= base;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveBound {
    pub index: usize,
    pub side: BoundSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub x_opt: Vec<f64>,
    pub f_opt: f64,
    /// Objective at the start that produced `x_opt`.
    pub f_start: f64,
    pub start_index: usize,
    pub n_iters: usize,
    /// Objective evaluations summed over all starts.
    pub n_evals: usize,
    pub converged: bool,
    pub active_bounds: Vec<ActiveBound>,
}

/// Minimises `f` over `[lo, hi]` from `x0`. `f` returns the value and derivative.
pub fn minimize_1d<F>(f: F, lo: f64, hi: f64, x0: f64, cfg: &OptimConfig) -> Result<OptimResult>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    if !(lo < hi) || !(lo..=hi).contains(&x0) {
        return Err(Error::InvalidParameter(format!(
            "need lo < hi and x0 in [lo, hi], got [{lo}, {hi}] and {x0}"
        )));
    }
    let wrapped = |x: &[f64]| {
        let (v, g) = f(x[0]);
        (v, vec![g])
    };
    minimize_box(
        wrapped,
        &[lo],
        &[hi],
        &[vec![x0]],
        &OptimConfig {
            n_starts: 1,
            ..*cfg
        },
    )
}

/// Runs projected BFGS from every start and keeps the best end point.
///
/// Ties in the objective go to the earlier start, so the result does not
/// depend on how the starts are scheduled.
pub fn minimize_box<F>(
    f: F,
    lower: &[f64],
    upper: &[f64],
    starts: &[Vec<f64>],
    cfg: &OptimConfig,
) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>) + Sync,
{
    cfg.validate()?;
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(Error::InvalidParameter("bound dimensions differ".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(Error::InvalidParameter(
            "need lower < upper componentwise".into(),
        ));
    }
    if starts.is_empty() {
        return Err(Error::InvalidParameter("no starting points".into()));
    }
    for s in starts {
        if s.len() != lower.len()
            || s.iter()
                .zip(lower.iter().zip(upper))
                .any(|(x, (l, u))| !(l <= x && x <= u))
        {
            return Err(Error::InvalidParameter(format!("infeasible start {s:?}")));
        }
    }
    let runs = par::map_tasks(starts.len(), |k| {
        let mut r = projected_bfgs(&f, lower, upper, &starts[k], cfg);
        r.start_index = k;
        r
    });
    let total_evals = runs.iter().map(|r| r.n_evals).sum();
    let mut best = runs
        .into_iter()
        .reduce(|a, b| {
            let b_better = match (a.f_opt.is_nan(), b.f_opt.is_nan()) {
                (true, false) => true,
                (false, false) => b.f_opt < a.f_opt,
                _ => false,
            };
            if b_better {
                b
            } else {
                a
            }
        })
        .expect("at least one start");
    best.n_evals = total_evals;
    Ok(best)
}

struct Eval {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn free_mask(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len())
        .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
        .collect()
}

fn identity(n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
        .collect()
}

fn active_bounds(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<ActiveBound> {
    (0..x.len())
        .filter_map(|i| {
            if x[i] <= lo[i] {
                Some(ActiveBound {
                    index: i,
                    side: BoundSide::Lower,
                })
            } else if x[i] >= hi[i] {
                Some(ActiveBound {
                    index: i,
                    side: BoundSide::Upper,
                })
            } else {
                None
            }
        })
        .collect()
}

fn projected_bfgs<F>(f: &F, lo: &[f64], hi: &[f64], x0: &[f64], cfg: &OptimConfig) -> OptimResult
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = lo.len();
    let mut evals = 0usize;
    let mut evaluate = |x: Vec<f64>| {
        evals += 1;
        let (fx, g) = f(&x);
        Eval { x, f: fx, g }
    };
    let mut cur = evaluate(x0.to_vec());
    let f_start = cur.f;
    let mut h = identity(n, 1.0);
    let mut fresh = true;
    let mut prev_free: Option<Vec<bool>> = None;
    let mut converged = false;
    let mut iters = 0;

    while iters < cfg.max_iters {
        if !cur.f.is_finite() || cur.g.iter().any(|v| !v.is_finite()) {
            break;
        }
        let free = free_mask(&cur.x, &cur.g, lo, hi);
        let pg: Vec<f64> = (0..n)
            .map(|i| if free[i] { cur.g[i] } else { 0.0 })
            .collect();
        if norm_inf(&pg) <= cfg.grad_tol {
            converged = true;
            break;
        }
        if prev_free.as_ref() != Some(&free) {
            h = identity(n, 1.0);
            fresh = true;
            prev_free = Some(free.clone());
        }
        let mut dir: Vec<f64> = (0..n)
            .map(|i| {
                if free[i] {
                    -(0..n)
                        .filter(|&j| free[j])
                        .map(|j| h[i][j] * pg[j])
                        .sum::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        let mut slope = dot(&cur.g, &dir);
        if !(slope < 0.0) {
            h = identity(n, 1.0);
            fresh = true;
            dir = pg.iter().map(|v| -v).collect();
            slope = dot(&cur.g, &dir);
        }
        let max_step = (0..n)
            .filter_map(|i| {
                if dir[i] < 0.0 {
                    Some((lo[i] - cur.x[i]) / dir[i])
                } else if dir[i] > 0.0 {
                    Some((hi[i] - cur.x[i]) / dir[i])
                } else {
                    None
                }
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        iters += 1;

        let trial_point = |a: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if a >= max_step && max_step.is_finite() {
                        // land exactly on the bound that limited the step
                        let hit = if dir[i] < 0.0 {
                            (lo[i] - cur.x[i]) / dir[i] <= max_step
                        } else if dir[i] > 0.0 {
                            (hi[i] - cur.x[i]) / dir[i] <= max_step
                        } else {
                            false
                        };
                        if hit {
                            return if dir[i] < 0.0 { lo[i] } else { hi[i] };
                        }
                    }
                    (cur.x[i] + a * dir[i]).clamp(lo[i], hi[i])
                })
                .collect()
        };
        let a0 = 1.0_f64.min(max_step);
        let found = line_search(
            &mut evaluate,
            &trial_point,
            &cur,
            &dir,
            slope,
            a0,
            max_step,
            cfg,
        );
        let next = match found {
            Some(e) => e,
            None => {
                if fresh {
                    break;
                }
                h = identity(n, 1.0);
                fresh = true;
                continue;
            }
        };

        let s: Vec<f64> = (0..n).map(|i| next.x[i] - cur.x[i]).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| if free[i] { next.g[i] - cur.g[i] } else { 0.0 })
            .collect();
        let small_step = norm_inf(&s) <= cfg.step_tol * (1.0 + norm_inf(&cur.x));
        let small_change = (cur.f - next.f).abs() <= cfg.step_tol * (1.0 + cur.f.abs());
        cur = next;
        if small_step && small_change {
            let free = free_mask(&cur.x, &cur.g, lo, hi);
            let pg: Vec<f64> = (0..n)
                .map(|i| if free[i] { cur.g[i] } else { 0.0 })
                .collect();
            converged = norm_inf(&pg) <= cfg.grad_tol.sqrt();
            break;
        }

        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-12 * (dot(&s, &s) * yy).sqrt() && sy > 0.0 {
            if fresh {
                h = identity(n, sy / yy);
                fresh = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
    }

    OptimResult {
        active_bounds: active_bounds(&cur.x, lo, hi),
        x_opt: cur.x,
        f_opt: cur.f,
        f_start,
        start_index: 0,
        n_iters: iters,
        n_evals: evals,
        converged,
    }
}

/// `H ← (I − r s yᵀ) H (I − r y sᵀ) + r s sᵀ` with `r = 1/(sᵀy)`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let r = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + r * yhy) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

const MAX_TRIALS: usize = 30;

#[allow(clippy::too_many_arguments)]
fn line_search<E, P>(
    evaluate: &mut E,
    point: &P,
    cur: &Eval,
    dir: &[f64],
    slope0: f64,
    a0: f64,
    a_max: f64,
    cfg: &OptimConfig,
) -> Option<Eval>
where
    E: FnMut(Vec<f64>) -> Eval,
    P: Fn(f64) -> Vec<f64>,
{
    if !(a0 > 0.0) {
        return None;
    }
    let f0 = cur.f;
    let armijo = |a: f64, fa: f64| fa <= f0 + cfg.wolfe_c1 * a * slope0;
    let curvature = |da: f64| da.abs() <= -cfg.wolfe_c2 * slope0;

    let mut trials = 0;
    let mut prev: (f64, f64, f64) = (0.0, f0, slope0);
    let mut prev_eval: Option<Eval> = None;
    let mut a = a0;
    let (mut lo, mut hi, mut lo_eval);
    loop {
        let e = evaluate(point(a));
        trials += 1;
        let da = dot(&e.g, dir);
        if !e.f.is_finite() {
            // shrink into the finite region
            lo = prev;
            lo_eval = prev_eval;
            hi = (a, f64::INFINITY, 0.0);
            break;
        }
        if !armijo(a, e.f) || (trials > 1 && e.f >= prev.1) {
            lo = prev;
            lo_eval = prev_eval;
            hi = (a, e.f, da);
            break;
        }
        if curvature(da) {
            return Some(refine(evaluate, point, e, a, da, slope0, a_max));
        }
        if da >= 0.0 {
            lo = (a, e.f, da);
            hi = prev;
            lo_eval = Some(e);
            break;
        }
        if a >= a_max || trials >= MAX_TRIALS {
            return Some(e);
        }
        prev = (a, e.f, da);
        prev_eval = Some(e);
        a = (2.0 * a).min(a_max);
    }

    while trials < MAX_TRIALS {
        let a = interpolate(lo, hi);
        let e = evaluate(point(a));
        trials += 1;
        let da = dot(&e.g, dir);
        if !e.f.is_finite() || !armijo(a, e.f) || e.f >= lo.1 {
            hi = (a, e.f, da);
        } else {
            if curvature(da) {
                return Some(refine(evaluate, point, e, a, da, slope0, a_max));
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, e.f, da);
            lo_eval = Some(e);
        }
        if (hi.0 - lo.0).abs() <= 1e-16 * lo.0.abs().max(1e-300) {
            break;
        }
    }
    lo_eval.filter(|e| e.f < f0)
}

/// One secant step on the directional derivative from an accepted first trial.
///
/// When the unit step already satisfies the Wolfe conditions but the secant
/// estimate of the line minimiser is far from it, the estimate is evaluated
/// once and kept if it is lower. On quadratics this makes every line search
/// exact, which restores finite termination of BFGS.
fn refine<E, P>(
    evaluate: &mut E,
    point: &P,
    e: Eval,
    a: f64,
    da: f64,
    slope0: f64,
    a_max: f64,
) -> Eval
where
    E: FnMut(Vec<f64>) -> Eval,
    P: Fn(f64) -> Vec<f64>,
{
    let denom = da - slope0;
    if !(denom > 0.0) {
        return e;
    }
    let a_star = (-a * slope0 / denom).min(a_max);
    if !(a_star > 0.0) || (a_star - a).abs() <= 1e-3 * a {
        return e;
    }
    let cand = evaluate(point(a_star));
    if cand.f.is_finite() && cand.f < e.f {
        cand
    } else {
        e
    }
}

/// Safeguarded cubic interpolation between two bracketing trial steps.
fn interpolate(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> f64 {
    let (a1, f1, d1) = lo;
    let (a2, f2, d2) = hi;
    let (left, right) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
    let width = right - left;
    let mid = 0.5 * (left + right);
    if !f2.is_finite() {
        return mid;
    }
    let t1 = d1 + d2 - 3.0 * (f1 - f2) / (a1 - a2);
    let disc = t1 * t1 - d1 * d2;
    if disc < 0.0 {
        return mid;
    }
    let t2 = (a2 - a1).signum() * disc.sqrt();
    let a = a2 - (a2 - a1) * (d2 + t2 - t1) / (d2 - d1 + 2.0 * t2);
    if a.is_finite() && a > left + 0.1 * width && a < right - 0.1 * width {
        a
    } else {
        mid
    }
}
