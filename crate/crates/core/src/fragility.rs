//! Lognormal fragility curves and the ergodic × non-ergodic capacity
//! decomposition `Z = X · Y`.
//!
//! `X` carries record-to-record (ergodic) variability and is renewed at every
//! hazard event; `Y` carries system-parameter (non-ergodic) uncertainty and is
//! fixed for the life of one structure. Both are lognormal, so `Z` is too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{lognormal_cdf, lognormal_pdf, std_normal_pdf, LognormalSpec};
use crate::quad;
use crate::riskengine::QuadratureSettings;

/// Slack for rounded input tables when splitting off the ergodic part.
const DEFICIT_CLAMP: f64 = 1e-9;

/// Probability of reaching the limit state given an intensity measure level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FragilityCurve {
    pub capacity: LognormalSpec,
}

impl FragilityCurve {
    pub fn new(capacity: LognormalSpec) -> Self {
        Self { capacity }
    }

    pub fn evaluate(&self, im: f64) -> Result<f64> {
        lognormal_cdf(&self.capacity, im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub x: LognormalSpec,
    pub y: LognormalSpec,
}

impl Decomposition {
    pub fn new(x: LognormalSpec, y: LognormalSpec) -> Self {
        Self { x, y }
    }

    /// Split a total capacity into the given ergodic part and the implied
    /// system-only factor.
    pub fn from_total(z: LognormalSpec, x: LognormalSpec) -> Result<Self> {
        Ok(Self { x, y: decompose(&z, &x)? })
    }

    pub fn total(&self) -> LognormalSpec {
        compose(&self.x, &self.y)
    }
}

/// Product of two independent lognormals.
pub fn compose(x: &LognormalSpec, y: &LognormalSpec) -> LognormalSpec {
    LognormalSpec {
        median: x.median * y.median,
        dispersion: x.dispersion.hypot(y.dispersion),
    }
}

/// Inverse of [`compose`]: the factor `y` such that `compose(x, y) == z`.
pub fn decompose(z: &LognormalSpec, x: &LognormalSpec) -> Result<LognormalSpec> {
    let deficit = x.dispersion * x.dispersion - z.dispersion * z.dispersion;
    let dispersion = if deficit <= 0.0 {
        (-deficit).sqrt()
    } else if deficit <= DEFICIT_CLAMP {
        0.0
    } else {
        return Err(Error::DispersionDeficit { total: z.dispersion, ergodic: x.dispersion });
    };
    LognormalSpec::new(z.median / x.median, dispersion)
}

/// Capacity of one structure whose system factor is known: `Z(y) = X · y`.
pub fn conditional_capacity(x: &LognormalSpec, y_value: f64) -> Result<LognormalSpec> {
    if !(y_value > 0.0 && y_value.is_finite()) {
        return Err(Error::domain(format!("system factor must be positive, got {y_value}")));
    }
    Ok(LognormalSpec { median: x.median * y_value, dispersion: x.dispersion })
}

/// Density of `X · Y` at `z_value` by direct quadrature of
/// `∫ f_X(z/y) f_Y(y) / y dy`, independent of the lognormal closure used by
/// [`compose`].
///
/// The integral runs over the standard-normal coordinate of whichever factor
/// has the smaller dispersion, so the other factor's term is never narrower
/// than the node spacing allows.
pub fn product_density_numeric(
    x: &LognormalSpec,
    y: &LognormalSpec,
    z_value: f64,
    q: &QuadratureSettings,
) -> Result<f64> {
    if !(z_value > 0.0) {
        return Err(Error::domain(format!("z must be positive, got {z_value}")));
    }
    q.validate()?;
    if y.is_degenerate() {
        return lognormal_pdf(x, z_value / y.median).map(|d| d / y.median);
    }
    if x.is_degenerate() {
        return lognormal_pdf(y, z_value / x.median).map(|d| d / x.median);
    }
    // Integrate over the narrow factor `a`; `b` supplies the density term.
    let (a, b) = if y.dispersion <= x.dispersion { (y, x) } else { (x, y) };
    let step = 2.0 * q.u_span / (q.n_inner - 1) as f64;
    let values: Vec<f64> = quad::nodes(-q.u_span, q.u_span, q.n_inner)
        .map(|u| {
            let av = a.at_std(u);
            let fb = lognormal_pdf(b, z_value / av).unwrap_or(0.0);
            std_normal_pdf(u) * fb / av
        })
        .collect();
    let (density, residual) = quad::simpson_checked(&values, step);
    if residual > q.rel_tol {
        return Err(Error::NonConvergence { integral: "product density", residual });
    }
    Ok(density)
}
