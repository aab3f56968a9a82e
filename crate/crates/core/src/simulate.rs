//! Reproducible data generation and the Monte Carlo harness.
//!
//! Every replication draws from its own ChaCha8 stream selected by the
//! replication index, so results do not depend on scheduling.

use crate::baseline::{em_fit, EmConfig, GaussianParams};
use crate::empirical::{Bandwidth, BandwidthRule, Sample};
use crate::error::{Error, Result};
use crate::estimate::{fit_lambda, fit_theta, Problem};
use crate::model::{ParamSpace, Theta};
use crate::normal;
use crate::optimize::{default_starts, OptimConfig};
use crate::par;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator for stream `index` under `seed`.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on `[0, 1)` with 53 random bits.
fn unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * f64::EPSILON / 2.0
}

/// Uniform on `(0, 1)`, safe to feed to the normal quantile.
fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * f64::EPSILON / 2.0
}

/// Finite Gaussian mixture `Σ wⱼ N(cⱼ, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    centers: Vec<f64>,
    sigma: f64,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, centers: Vec<f64>, sigma: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != centers.len() {
            return Err(Error::InvalidParameter(
                "weights and centers must be nonempty and of equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("invalid mixture component".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self {
            weights,
            centers,
            sigma,
        })
    }

    /// `λ N(μ₁, σ²) + (1 − λ) N(μ₂, σ²)`.
    pub fn two_component(theta: &Theta, sigma: f64) -> Result<Self> {
        Self::new(
            vec![theta.lambda, 1.0 - theta.lambda],
            vec![theta.mu1, theta.mu2],
            sigma,
        )
    }

    /// The symmetric trimodal law `1/8 φ(x + 4) + 3/4 φ(x) + 1/8 φ(x − 4)`.
    pub fn trimodal_component() -> Self {
        Self::new(vec![0.125, 0.75, 0.125], vec![-4.0, 0.0, 4.0], 1.0).expect("valid")
    }

    /// `1/4 f(x) + 3/4 f(x − 4)` with `f` the trimodal component, expanded
    /// into six Gaussians.
    pub fn trimodal() -> Self {
        Self::new(
            vec![
                1.0 / 32.0,
                3.0 / 16.0,
                1.0 / 32.0,
                3.0 / 32.0,
                9.0 / 16.0,
                3.0 / 32.0,
            ],
            vec![-4.0, 0.0, 4.0, 0.0, 4.0, 8.0],
            1.0,
        )
        .expect("valid")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * c)
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * normal::cdf((x - c) / self.sigma))
            .sum()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.centers)
            .map(|(w, c)| w * normal::pdf((x - c) / self.sigma))
            .sum::<f64>()
            / self.sigma
    }

    /// `n` sorted draws. Each draw consumes one uniform for the component and
    /// one for the inverse-CDF normal.
    pub fn draw(&self, n: usize, rng: &mut impl RngCore) -> Vec<f64> {
        let last = self.weights.len() - 1;
        let mut out: Vec<f64> = (0..n)
            .map(|_| {
                let u = unit(rng);
                let mut acc = 0.0;
                let mut j = last;
                for (k, w) in self.weights[..last].iter().enumerate() {
                    acc += w;
                    if u < acc {
                        j = k;
                        break;
                    }
                }
                self.centers[j] + self.sigma * normal::quantile(open_unit(rng))
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

/// `n` sorted draws from `λ N(μ₁, σ²) + (1 − λ) N(μ₂, σ²)` on stream 0 of `seed`.
pub fn sample_gaussian_mixture(theta0: &Theta, sigma: f64, n: usize, seed: u64) -> Result<Sample> {
    let g = GaussianMixture::two_component(theta0, sigma)?;
    Sample::new(g.draw(n, &mut rng_for(seed, 0)))
}

/// `n` sorted draws from [`GaussianMixture::trimodal`] on stream 0 of `seed`.
pub fn sample_trimodal(n: usize, seed: u64) -> Result<Sample> {
    Sample::new(GaussianMixture::trimodal().draw(n, &mut rng_for(seed, 0)))
}

/// Bandwidth as written in a scenario file: a positive number or the name of
/// a rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSetting {
    Value(f64),
    Rule(BandwidthRule),
}

impl Default for BandwidthSetting {
    fn default() -> Self {
        Self::Rule(BandwidthRule::NPowNegQuarter)
    }
}

impl BandwidthSetting {
    pub fn resolve(&self, n: usize) -> Result<Bandwidth> {
        match *self {
            Self::Value(v) => Bandwidth::fixed(v),
            Self::Rule(BandwidthRule::NPowNegQuarter) => Ok(Bandwidth::n_pow_neg_quarter(n)),
            Self::Rule(BandwidthRule::Fixed) => Err(Error::InvalidParameter(
                "a fixed bandwidth needs a numeric value".into(),
            )),
        }
    }
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub n: usize,
    pub reps: usize,
    pub problem: Problem,
    pub seed: u64,
    #[serde(default)]
    pub bandwidth: BandwidthSetting,
}

impl Scenario {
    pub fn theta0(&self) -> Result<Theta> {
        Theta::new(self.lambda, self.mu1, self.mu2)
    }

    pub fn validate(&self) -> Result<()> {
        self.theta0()?;
        if self.reps < 1 {
            return Err(Error::InvalidParameter("reps must be >= 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "n must be >= 2, got {}",
                self.n
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        self.bandwidth.resolve(self.n)?;
        Ok(())
    }

    /// Names of the estimated coordinates, in report order.
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self.problem {
            Problem::P1 => &["lambda"],
            _ => &["lambda", "mu1", "mu2"],
        }
    }

    /// Parameter space centred on the true locations: each location box
    /// reaches `reach` beyond its true value and stops `min_separation / 2`
    /// short of the midpoint.
    pub fn space(&self, d: f64, reach: f64, min_separation: f64) -> Result<ParamSpace> {
        let t = self.theta0()?;
        let mid = 0.5 * (t.mu1 + t.mu2);
        let half = 0.5 * min_separation;
        let (b1, b2) = if t.mu1 < t.mu2 {
            ((t.mu1 - reach, mid - half), (mid + half, t.mu2 + reach))
        } else {
            ((mid + half, t.mu1 + reach), (t.mu2 - reach, mid - half))
        };
        ParamSpace::new(d, b1, b2, min_separation)
    }
}

/// Outcome of one Monte Carlo replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub estimates: Vec<f64>,
    pub converged: bool,
    /// EM only: whether the log-likelihood trace was nondecreasing.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: Scenario,
    pub parameters: Vec<String>,
    pub mean: Vec<f64>,
    /// Empirical standard deviation with divisor `successes − 1`; zero when
    /// undefined.
    pub std: Vec<f64>,
    pub std_defined: bool,
    pub successes: usize,
    pub failures: usize,
    pub nonconverged: usize,
    pub nonmonotone: usize,
    pub replications: Vec<Option<Replication>>,
}

fn replicate(
    scenario: &Scenario,
    theta0: &Theta,
    space: &ParamSpace,
    cfg: &OptimConfig,
    index: usize,
) -> Result<Replication> {
    let g = GaussianMixture::two_component(theta0, scenario.sigma)?;
    let sample = Sample::new(g.draw(scenario.n, &mut rng_for(scenario.seed, index as u64)))?;
    match scenario.problem {
        Problem::P1 => {
            let fit = fit_lambda(&sample, theta0.mu1, theta0.mu2, space, cfg)?;
            Ok(Replication {
                estimates: fit.estimates(),
                converged: fit.diagnostics.converged,
                monotone: true,
            })
        }
        Problem::P2 => {
            let b = scenario.bandwidth.resolve(sample.n())?;
            let fit = fit_theta(&sample, space, &b, cfg)?;
            Ok(Replication {
                estimates: fit.estimates(),
                converged: fit.diagnostics.converged,
                monotone: true,
            })
        }
        Problem::Em => {
            let [l, m1, m2] = default_starts(space, &sample, 1)[0];
            let em_cfg = EmConfig {
                sigma: scenario.sigma,
                ..EmConfig::default()
            };
            let fit = em_fit(&sample, &em_cfg, GaussianParams::new(l, m1, m2)?)?;
            Ok(Replication {
                estimates: fit.params.to_array().to_vec(),
                converged: fit.converged,
                monotone: fit.monotone,
            })
        }
    }
}

/// Simulates `reps` samples, fits each per `scenario.problem` and aggregates
/// in replication order.
pub fn run_monte_carlo(
    scenario: &Scenario,
    space: &ParamSpace,
    cfg: &OptimConfig,
) -> Result<McReport> {
    scenario.validate()?;
    space.validate()?;
    cfg.validate()?;
    let theta0 = scenario.theta0()?;
    let outcomes = par::map_tasks(scenario.reps, |r| {
        replicate(scenario, &theta0, space, cfg, r).ok()
    });
    let names = scenario.parameter_names();
    let ok: Vec<&Replication> = outcomes.iter().flatten().collect();
    let successes = ok.len();
    let dim = names.len();
    let m = successes as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|j| {
            if successes == 0 {
                f64::NAN
            } else {
                ok.iter().map(|r| r.estimates[j]).sum::<f64>() / m
            }
        })
        .collect();
    let std_defined = successes >= 2;
    let std = (0..dim)
        .map(|j| {
            if !std_defined {
                return 0.0;
            }
            let ss: f64 = ok.iter().map(|r| (r.estimates[j] - mean[j]).powi(2)).sum();
            (ss / (m - 1.0)).sqrt()
        })
        .collect();
    Ok(McReport {
        scenario: *scenario,
        parameters: names.iter().map(|s| s.to_string()).collect(),
        mean,
        std,
        std_defined,
        successes,
        failures: scenario.reps - successes,
        nonconverged: ok.iter().filter(|r| !r.converged).count(),
        nonmonotone: ok.iter().filter(|r| !r.monotone).count(),
        replications: outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniforms_in_range() {
        let mut rng = rng_for(7, 3);
        for _ in 0..10_000 {
            let u = unit(&mut rng);
            assert!((0.0..1.0).contains(&u));
            let v = open_unit(&mut rng);
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|_| rng_for(1, 0).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(rng_for(1, 0).next_u64(), rng_for(1, 1).next_u64());
        assert_ne!(rng_for(1, 0).next_u64(), rng_for(2, 0).next_u64());
    }

    #[test]
    fn trimodal_weights() {
        let g = GaussianMixture::trimodal();
        assert_eq!(g.weights().iter().sum::<f64>(), 1.0);
        assert_eq!(g.mean(), 3.0);
        let f = GaussianMixture::trimodal_component();
        let t = Theta::new(0.25, 0.0, 4.0).unwrap();
        for x in [-5.0, -1.0, 0.3, 2.0, 4.4, 9.0] {
            let composed = 0.25 * f.cdf(x - t.mu1) + 0.75 * f.cdf(x - t.mu2);
            assert!((composed - g.cdf(x)).abs() < 1e-15);
            let composed = 0.25 * f.pdf(x) + 0.75 * f.pdf(x - 4.0);
            assert!((composed - g.pdf(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn scenario_json() {
        let s: Scenario = serde_json::from_str(
            r#"{"lambda":0.25,"mu1":-1,"mu2":2,"n":200,"reps":10,"problem":"p2","seed":5}"#,
        )
        .unwrap();
        assert_eq!(s.sigma, 1.0);
        assert_eq!(
            s.bandwidth,
            BandwidthSetting::Rule(BandwidthRule::NPowNegQuarter)
        );
        let s: Scenario = serde_json::from_str(
            r#"{"lambda":0.25,"mu1":-1,"mu2":2,"sigma":1,"n":200,"reps":10,"problem":"em","seed":5,"bandwidth":0.4}"#,
        )
        .unwrap();
        assert_eq!(s.bandwidth.resolve(200).unwrap().value, 0.4);
        assert!(serde_json::from_str::<Scenario>(r#"{"lambda":0.25}"#).is_err());
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scenario_space_matches_truth() {
        let s = Scenario {
            lambda: 0.25,
            mu1: -1.0,
            mu2: 2.0,
            sigma: 1.0,
            n: 100,
            reps: 1,
            problem: Problem::P2,
            seed: 0,
            bandwidth: BandwidthSetting::default(),
        };
        let sp = s.space(0.05, 3.0, 0.5).unwrap();
        assert_eq!(sp.lower(), [0.0, -4.0, 0.75]);
        assert_eq!(sp.upper(), [0.45, 0.25, 5.0]);
        assert!(sp.contains(&s.theta0().unwrap()));
    }
}
