//! Normal and lognormal primitives.
//!
//! Every lognormal quantity in the engine (capacity factors, pulse
//! intensities) is a [`LognormalSpec`]: a linear median and the standard
//! deviation of its natural log. A zero dispersion is legal and denotes a
//! deterministic value.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Lognormal quantity described by its median and log-standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalSpec {
    pub median: f64,
    pub dispersion: f64,
}

impl LognormalSpec {
    pub fn new(median: f64, dispersion: f64) -> Result<Self> {
        if !(median.is_finite() && median > 0.0) {
            return Err(Error::domain(format!("median must be positive, got {median}")));
        }
        if !(dispersion.is_finite() && dispersion >= 0.0) {
            return Err(Error::domain(format!(
                "dispersion must be non-negative, got {dispersion}"
            )));
        }
        Ok(Self { median, dispersion })
    }

    /// Deterministic unit factor.
    pub const fn unit() -> Self {
        Self { median: 1.0, dispersion: 0.0 }
    }

    pub fn log_mean(&self) -> f64 {
        self.median.ln()
    }

    pub fn is_degenerate(&self) -> bool {
        self.dispersion == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.median, self.dispersion).map(|_| ())
    }

    /// Value at standard-normal coordinate `u`: `median * exp(dispersion * u)`.
    pub fn at_std(&self, u: f64) -> f64 {
        self.median * (self.dispersion * u).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        lognormal_cdf(self, x)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        lognormal_pdf(self, x)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        lognormal_quantile(self, p)
    }
}

/// Standard normal CDF. Saturates to 0 and 1 in the far tails.
pub fn std_normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(u: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Inverse of [`std_normal_cdf`] on the open interval (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
    }
    let u = -SQRT_2 * erf::erfc_inv(2.0 * p);
    // one Newton step against the cdf above
    let d = std_normal_pdf(u);
    if d > 0.0 {
        Ok(u - (std_normal_cdf(u) - p) / d)
    } else {
        Ok(u)
    }
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::domain(format!("argument must be positive, got {x}")))
    }
}

/// `Φ((ln x − ln median)/dispersion)`; a step at the median when the
/// dispersion is zero.
pub fn lognormal_cdf(spec: &LognormalSpec, x: f64) -> Result<f64> {
    check_positive(x)?;
    if spec.is_degenerate() {
        return Ok(if x < spec.median { 0.0 } else { 1.0 });
    }
    Ok(std_normal_cdf((x / spec.median).ln() / spec.dispersion))
}

pub fn lognormal_pdf(spec: &LognormalSpec, x: f64) -> Result<f64> {
    check_positive(x)?;
    if spec.is_degenerate() {
        return Err(Error::domain("degenerate lognormal has no density"));
    }
    let u = (x / spec.median).ln() / spec.dispersion;
    Ok(std_normal_pdf(u) / (x * spec.dispersion))
}

pub fn lognormal_quantile(spec: &LognormalSpec, p: f64) -> Result<f64> {
    let u = std_normal_quantile(p)?;
    Ok(spec.at_std(u))
}
