//! Semiparametric estimation of a two-component location mixture
//! `G(x) = λ F(x − μ₁) + (1 − λ) F(x − μ₂)` with `F` symmetric about zero.
//!
//! The Euclidean part `(λ, μ₁, μ₂)` is estimated by minimising a contrast that
//! measures how far `A_θ⁻¹ G` is from being symmetric, with `G` replaced by the
//! empirical distribution function (locations known) or by its kernel-smoothed
//! version (locations unknown). `F` and its density are then recovered by
//! inverting the mixing operator and symmetrising.
//!
//! Modules:
//! - [`model`]: parameter types and the operator algebra
//! - [`empirical`]: samples, ECDF, triangular kernel smoothing
//! - [`contrast`]: closed-form criteria and gradients
//! - [`optimize`]: projected BFGS with multi-start
//! - [`estimate`]: estimators of `λ`, `θ`, `F`, `f` and jackknife errors
//! - [`baseline`]: Gaussian mixture maximum likelihood by EM
//! - [`simulate`]: reproducible data generation and Monte Carlo harness

pub mod baseline;
pub mod contrast;
pub mod empirical;
pub mod error;
pub mod estimate;
pub mod model;
pub mod normal;
pub mod optimize;
pub mod par;
pub mod simulate;

pub use contrast::{contrast_p1, contrast_p2, ContrastValue, LambdaContrast};
pub use empirical::{Bandwidth, BandwidthRule, Sample};
pub use error::{Error, Result};
pub use estimate::{DensityEstimate, FitResult, Problem};

pub use model::{Curve, ParamSpace, RealFn, SeriesTruncation, Theta};
pub use optimize::{OptimConfig, OptimResult};
