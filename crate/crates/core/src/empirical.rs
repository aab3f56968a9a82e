//! Samples, the empirical distribution function, the triangular kernel pair
//! and the kernel-smoothed distribution and density estimates.

use crate::error::{Error, Result};
use crate::model::RealFn;
use serde::{Deserialize, Serialize};

/// Sorted i.i.d. observations (at least two, all finite).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSample(format!(
                "need n >= 2 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "observation {} is not finite ({})",
                i + 1,
                values[i]
            )));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    /// Unbiased sample standard deviation.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.values.iter().map(|v| (v - m).powi(2)).sum();
        (ss / (self.n() - 1) as f64).sqrt()
    }

    /// Linear-interpolation quantile (type 7).
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let h = (self.n() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo])
    }

    /// The sample with observation `i` (in sorted order) removed.
    pub fn without(&self, i: usize) -> Result<Self> {
        let mut v = self.values.clone();
        v.remove(i);
        Self::new(v)
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    /// Number of observations `≤ x`.
    pub fn count_le(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// Number of observations `< x`.
    pub fn count_lt(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v < x)
    }
}

/// Smoothing kernel. Only the triangular kernel `q(x) = (1 − |x|)₊` is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    #[default]
    Triangular,
}

impl KernelSpec {
    pub fn name(&self) -> &'static str {
        "triangular"
    }

    pub fn support_halfwidth(&self) -> f64 {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed,
    NPowNegQuarter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub value: f64,
    pub rule: BandwidthRule,
}

impl Bandwidth {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {value}"
            )));
        }
        Ok(Self {
            value,
            rule: BandwidthRule::Fixed,
        })
    }

    /// `b = n^(−1/4)`.
    pub fn n_pow_neg_quarter(n: usize) -> Self {
        Self {
            value: (n as f64).powf(-0.25),
            rule: BandwidthRule::NPowNegQuarter,
        }
    }
}

pub fn default_bandwidth(n: usize) -> Bandwidth {
    Bandwidth::n_pow_neg_quarter(n)
}

/// Triangular kernel `q(x) = (1 − |x|)·1{|x| ≤ 1}`.
#[inline]
pub fn kernel_q(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0 - a
    } else {
        0.0
    }
}

/// Integrated triangular kernel `Q(x) = ∫_{−∞}^x q`.
#[inline]
pub fn kernel_cdf(x: f64) -> f64 {
    if x <= -1.0 {
        0.0
    } else if x <= 0.0 {
        0.5 * (x + 1.0) * (x + 1.0)
    } else if x < 1.0 {
        1.0 - 0.5 * (1.0 - x) * (1.0 - x)
    } else {
        1.0
    }
}

/// `Ĝₙ(x) = #{i : Xᵢ ≤ x}/n`.
pub fn ecdf(sample: &Sample, x: f64) -> f64 {
    sample.count_le(x) as f64 / sample.n() as f64
}

/// `G̃ₙ(x) = (1/n) Σ Q((x − Xₖ)/b)`.
pub fn smoothed_cdf(sample: &Sample, b: &Bandwidth, x: f64) -> f64 {
    let bw = b.value;
    let v = sample.values();
    let full = sample.count_le(x - bw);
    let end = sample.count_lt(x + bw);
    let partial: f64 = v[full..end.max(full)]
        .iter()
        .map(|&xi| kernel_cdf((x - xi) / bw))
        .sum();
    (full as f64 + partial) / sample.n() as f64
}

/// `ĝₙ(x) = (1/(n b)) Σ q((x − Xₖ)/b)`.
pub fn kde(sample: &Sample, b: &Bandwidth, x: f64) -> f64 {
    let bw = b.value;
    let v = sample.values();
    let start = sample.count_le(x - bw);
    let end = sample.count_lt(x + bw);
    let s: f64 = v[start..end.max(start)]
        .iter()
        .map(|&xi| kernel_q((x - xi) / bw))
        .sum();
    s / (sample.n() as f64 * bw)
}

/// [`ecdf`] as a [`RealFn`].
#[derive(Debug, Clone, Copy)]
pub struct Ecdf<'a>(pub &'a Sample);

impl RealFn for Ecdf<'_> {
    fn eval(&self, x: f64) -> f64 {
        ecdf(self.0, x)
    }
}

/// [`smoothed_cdf`] as a [`RealFn`].
#[derive(Debug, Clone, Copy)]
pub struct SmoothedCdf<'a> {
    pub sample: &'a Sample,
    pub bandwidth: Bandwidth,
}

impl RealFn for SmoothedCdf<'_> {
    fn eval(&self, x: f64) -> f64 {
        smoothed_cdf(self.sample, &self.bandwidth, x)
    }
}

/// [`kde`] as a [`RealFn`].
#[derive(Debug, Clone, Copy)]
pub struct Kde<'a> {
    pub sample: &'a Sample,
    pub bandwidth: Bandwidth,
}

impl RealFn for Kde<'_> {
    fn eval(&self, x: f64) -> f64 {
        kde(self.sample, &self.bandwidth, x)
    }
}
