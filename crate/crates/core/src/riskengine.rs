//! Annual failure rates, lifetime failure probabilities and the error
//! diagnostics comparing the ensemble-rate shortcut with the exact
//! non-ergodic result.
//!
//! Every integral is taken in the standard-normal coordinate `u` of a
//! lognormal variable, on fixed Simpson grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fragility::{compose, conditional_capacity};
use crate::hazard::{two_in_fifty_rate, HazardModel};
use crate::probcore::{std_normal_cdf, std_normal_pdf, std_normal_quantile, LognormalSpec};
use crate::quad;

/// Extra inner-grid halvings tried before reporting non-convergence.
const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    /// Half-width of the standard-normal range.
    pub u_span: f64,
    /// Nodes for the integral over `Y`.
    pub n_outer: usize,
    /// Nodes for the integral over intensity.
    pub n_inner: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { u_span: 8.0, n_outer: 401, n_inner: 2001, rel_tol: 1e-6 }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_span > 0.0 && self.u_span.is_finite()) {
            return Err(Error::Config(format!("u_span must be positive, got {}", self.u_span)));
        }
        for (name, n) in [("n_outer", self.n_outer), ("n_inner", self.n_inner)] {
            if n < 3 || n % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd and at least 3, got {n}")));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Config(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol)));
        }
        Ok(())
    }

    /// Same settings with the node spacing halved on both grids.
    pub fn refined(&self) -> Self {
        Self { n_outer: 2 * self.n_outer - 1, n_inner: 2 * self.n_inner - 1, ..*self }
    }
}

/// Split `[lo, hi]` at `cuts` and share `n_total` nodes in proportion to
/// length. Each piece gets `4j + 1` nodes so the residual check can use
/// Simpson on the half grid.
fn segments(lo: f64, hi: f64, cuts: &[f64], n_total: usize) -> Vec<(f64, f64, usize)> {
    let eps = 1e-12 * (hi - lo);
    let mut edges = vec![lo];
    let mut inner: Vec<f64> = cuts.iter().copied().filter(|c| *c > lo + eps && *c < hi - eps).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() <= eps);
    edges.extend(inner);
    edges.push(hi);
    let panels = (n_total - 1) as f64;
    edges
        .windows(2)
        .map(|w| {
            let quarters = ((w[1] - w[0]) / (hi - lo) * panels / 4.0).round().max(1.0) as usize;
            (w[0], w[1], 4 * quarters + 1)
        })
        .collect()
}

/// Sum of Simpson estimates over the pieces and the summed absolute residual.
fn integrate(pieces: &[(f64, f64, usize)], f: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut residual = 0.0;
    for &(a, b, n) in pieces {
        // end nodes are nudged inside so one-sided limits are taken at jumps
        let nudge = 1e-10 * (b - a);
        let values = quad::nodes(a, b, n)
            .enumerate()
            .map(|(i, u)| match i {
                0 => f(u + nudge),
                _ if i + 1 == n => f(u - nudge),
                _ => f(u),
            })
            .collect::<Result<Vec<f64>>>()?;
        let (est, rel) = quad::simpson_checked(&values, (b - a) / (n - 1) as f64);
        total += est;
        residual += rel * est.abs();
    }
    Ok((total, residual))
}

/// Integration window in `u` for `capacity`, cut to the hazard's domain.
fn window(capacity: &LognormalSpec, hazard: &HazardModel, q: &QuadratureSettings) -> Result<(f64, f64)> {
    let to_u = |im: f64| (im / capacity.median).ln() / capacity.dispersion;
    let (lo, hi) = hazard.support();
    let u_lo = if lo > 0.0 { to_u(lo) } else { f64::NEG_INFINITY };
    let u_hi = if hi.is_finite() { to_u(hi) } else { f64::INFINITY };
    let below = std_normal_cdf(u_lo);
    let above = std_normal_cdf(-u_hi);
    if below + above > q.rel_tol {
        let tail = std_normal_quantile(q.rel_tol)?;
        let im = if below >= above { capacity.at_std(tail) } else { capacity.at_std(-tail) };
        return Err(Error::OutOfTable { im, lo, hi });
    }
    Ok((u_lo.max(-q.u_span), u_hi.min(q.u_span)))
}

fn breakpoints_u(capacity: &LognormalSpec, hazard: &HazardModel) -> Vec<f64> {
    hazard
        .breakpoints()
        .into_iter()
        .map(|im| (im / capacity.median).ln() / capacity.dispersion)
        .collect()
}

fn rate_unchecked(capacity: &LognormalSpec, hazard: &HazardModel, q: &QuadratureSettings) -> Result<f64> {
    if capacity.is_degenerate() {
        return hazard.exceedance(capacity.median);
    }
    let (mut ua, ub) = window(capacity, hazard, q)?;
    let mut flat = 0.0;
    if let Some((im_p, h_p)) = hazard.plateau() {
        let u_p = (im_p / capacity.median).ln() / capacity.dispersion;
        if u_p > ua {
            flat = h_p * std_normal_cdf(u_p);
            if u_p >= ub {
                return Ok(flat);
            }
            ua = u_p;
        }
    }
    let cuts = breakpoints_u(capacity, hazard);
    refine("annual rate", q, |n| {
        let (sum, residual) = integrate(&segments(ua, ub, &cuts, n), |u| {
            Ok(std_normal_pdf(u) * hazard.exceedance(capacity.at_std(u))?)
        })?;
        Ok((sum + flat, residual))
    })
}

/// Runs `attempt` on the inner grid, halving the spacing up to
/// [`MAX_REFINEMENTS`] times until the relative residual meets `rel_tol`.
fn refine(name: &'static str, q: &QuadratureSettings, mut attempt: impl FnMut(usize) -> Result<(f64, f64)>) -> Result<f64> {
    let mut n = q.n_inner;
    let mut rel = f64::NAN;
    for _ in 0..=MAX_REFINEMENTS {
        let (total, residual) = attempt(n)?;
        rel = if total > 0.0 { residual / total } else { 0.0 };
        if rel <= q.rel_tol {
            return Ok(total);
        }
        n = 2 * n - 1;
    }
    Err(Error::NonConvergence { integral: name, residual: rel })
}

/// `λ = ∫ f_C(im) H(im) dim`: annual rate of failure for a structure with
/// lognormal capacity `capacity` (in intensity units) under `hazard`.
pub fn annual_rate(capacity: &LognormalSpec, hazard: &HazardModel, q: &QuadratureSettings) -> Result<f64> {
    capacity.validate()?;
    hazard.validate()?;
    q.validate()?;
    rate_unchecked(capacity, hazard, q)
}

/// Same rate through `∫ F_C(im) h(im) dim`, closing the upper tail with
/// `F_C(b) H(b)`. Kept as an independent check on [`annual_rate`].
pub fn annual_rate_convolution(capacity: &LognormalSpec, hazard: &HazardModel, q: &QuadratureSettings) -> Result<f64> {
    capacity.validate()?;
    hazard.validate()?;
    q.validate()?;
    if capacity.is_degenerate() {
        return hazard.exceedance(capacity.median);
    }
    let (ua, ub) = window(capacity, hazard, q)?;
    let s = capacity.dispersion;
    let cuts = breakpoints_u(capacity, hazard);
    let tail = std_normal_cdf(ub) * hazard.exceedance(capacity.at_std(ub))?;
    refine("annual rate (convolution form)", q, |n| {
        let (sum, residual) = integrate(&segments(ua, ub, &cuts, n), |u| {
            let im = capacity.at_std(u);
            Ok(std_normal_cdf(u) * hazard.density(im)? * im * s)
        })?;
        Ok((sum + tail, residual))
    })
}

/// Annual rate of one structure whose non-ergodic factor is fixed at `y_value`.
pub fn conditional_rate(x: &LognormalSpec, y_value: f64, hazard: &HazardModel, q: &QuadratureSettings) -> Result<f64> {
    annual_rate(&conditional_capacity(x, y_value)?, hazard, q)
}

/// Conditional rates `λ(y)` cached on the outer grid of `Y`, so several
/// lifetimes can be evaluated without repeating the inner integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    /// `φ(u_i)`; empty when `Y` is degenerate.
    weights: Vec<f64>,
    step: f64,
    rates: Vec<f64>,
    rel_tol: f64,
}

impl RateProfile {
    pub fn new(x: &LognormalSpec, y: &LognormalSpec, hazard: &HazardModel, q: &QuadratureSettings) -> Result<Self> {
        x.validate()?;
        y.validate()?;
        hazard.validate()?;
        q.validate()?;
        if y.is_degenerate() {
            let rate = rate_unchecked(&conditional_capacity(x, y.median)?, hazard, q)?;
            return Ok(Self { weights: Vec::new(), step: 0.0, rates: vec![rate], rel_tol: q.rel_tol });
        }
        let us: Vec<f64> = quad::nodes(-q.u_span, q.u_span, q.n_outer).collect();
        // indexed parallel collect keeps node order, so sums are thread-count independent
        let rates = us
            .par_iter()
            .map(|&u| rate_unchecked(&conditional_capacity(x, y.at_std(u))?, hazard, q))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            weights: us.iter().map(|&u| std_normal_pdf(u)).collect(),
            step: 2.0 * q.u_span / (q.n_outer - 1) as f64,
            rates,
            rel_tol: q.rel_tol,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn expect(&self, name: &'static str, g: impl Fn(f64) -> f64) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(g(self.rates[0]));
        }
        let values: Vec<f64> = self.weights.iter().zip(&self.rates).map(|(w, r)| w * g(*r)).collect();
        let (est, rel) = quad::simpson_checked(&values, self.step);
        if rel > self.rel_tol {
            return Err(Error::NonConvergence { integral: name, residual: rel });
        }
        Ok(est)
    }

    /// `E_Y[λ(Y)]`, which equals the ensemble rate.
    pub fn mean_rate(&self) -> Result<f64> {
        self.expect("mean conditional rate", |r| r)
    }

    /// Exact lifetime failure probability `E_Y[1 − exp(−λ(Y) t)]`.
    pub fn lifetime(&self, t_d: f64) -> Result<f64> {
        check_time(t_d)?;
        self.expect("lifetime probability", |r| lifetime_from_rate(r, t_d))
    }

    /// `E_Y[p²]` for `p = 1 − exp(−λ(Y) t)`.
    pub fn lifetime_second_moment(&self, t_d: f64) -> Result<f64> {
        check_time(t_d)?;
        self.expect("lifetime second moment", |r| lifetime_from_rate(r, t_d).powi(2))
    }

    /// `t·Var[p]`.
    pub fn variance_product(&self, t_d: f64) -> Result<f64> {
        if self.is_degenerate() {
            check_time(t_d)?;
            return Ok(0.0);
        }
        let mean = self.lifetime(t_d)?;
        let second = self.lifetime_second_moment(t_d)?;
        Ok(t_d * (second - mean * mean).max(0.0))
    }

    /// Annual rate back-calculated from the one-year exact probability.
    pub fn exact_rate(&self) -> Result<f64> {
        if self.is_degenerate() {
            return Ok(self.rates[0]);
        }
        back_calc_rate(self.lifetime(1.0)?, 1.0)
    }
}

fn check_time(t_d: f64) -> Result<()> {
    if t_d > 0.0 && t_d.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("exposure time must be positive, got {t_d}")))
    }
}

pub fn lifetime_exact(
    x: &LognormalSpec,
    y: &LognormalSpec,
    hazard: &HazardModel,
    t_d: f64,
    q: &QuadratureSettings,
) -> Result<f64> {
    check_time(t_d)?;
    RateProfile::new(x, y, hazard, q)?.lifetime(t_d)
}

/// `1 − exp(−rate·t)` for a constant rate.
pub fn lifetime_from_rate(rate: f64, t_d: f64) -> f64 {
    -(-rate * t_d).exp_m1()
}

/// Inverse of [`lifetime_from_rate`].
pub fn back_calc_rate(pf: f64, t_d: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&pf) {
        return Err(Error::domain(format!("probability must lie in [0, 1), got {pf}")));
    }
    check_time(t_d)?;
    Ok(-(-pf).ln_1p() / t_d)
}

pub fn err_pct_pf(pf_ensemble: f64, pf_exact: f64) -> Result<f64> {
    if pf_exact == 0.0 {
        return Err(Error::domain("relative error against a zero exact probability"));
    }
    Ok(100.0 * (pf_ensemble - pf_exact) / pf_exact)
}

pub fn err_pct_lambda(lambda_ensemble: f64, lambda_exact: f64) -> Result<f64> {
    if lambda_exact == 0.0 {
        return Err(Error::domain("relative error against a zero exact rate"));
    }
    Ok(100.0 * (lambda_ensemble - lambda_exact) / lambda_exact)
}

/// `((σ_Y/σ_X)² + 1) / (margin/σ_X)`.
pub fn error_parameter(x: &LognormalSpec, y: &LognormalSpec, margin: f64) -> Result<f64> {
    if !(x.dispersion > 0.0) {
        return Err(Error::domain("error parameter needs a positive ergodic dispersion"));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::domain(format!("margin must be positive, got {margin}")));
    }
    let r = y.dispersion / x.dispersion;
    Ok((r * r + 1.0) / (margin / x.dispersion))
}

pub fn pf_variance_product(
    x: &LognormalSpec,
    y: &LognormalSpec,
    hazard: &HazardModel,
    t_d: f64,
    q: &QuadratureSettings,
) -> Result<f64> {
    check_time(t_d)?;
    RateProfile::new(x, y, hazard, q)?.variance_product(t_d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskReport {
    pub t_d: f64,
    /// Rate with record-to-record variability only.
    pub lambda_rtr: f64,
    /// Back-calculated from the one-year exact probability.
    pub lambda_exact: f64,
    pub lambda_ensemble: f64,
    pub pf_rtr: f64,
    pub pf_exact: f64,
    pub pf_ensemble: f64,
    /// `lambda_exact / lambda_rtr`.
    pub ratio_lambda: f64,
    /// `pf_exact / pf_rtr`.
    pub ratio_pf: f64,
    pub err_pct_pf: f64,
    pub err_pct_lambda: f64,
    pub error_parameter: Option<f64>,
    pub var_product: f64,
}

/// Margin of `x` over the intensity with a 2% chance of exceedance in 50 years.
pub fn derived_margin(x: &LognormalSpec, hazard: &HazardModel) -> Option<f64> {
    hazard.intensity_at_rate(two_in_fifty_rate()).map(|im| x.median / im)
}

pub fn assess(
    x: &LognormalSpec,
    y: &LognormalSpec,
    hazard: &HazardModel,
    margin: Option<f64>,
    t_d: f64,
    q: &QuadratureSettings,
) -> Result<RiskReport> {
    let profile = RateProfile::new(x, y, hazard, q)?;
    assess_with_profile(&profile, x, y, hazard, margin, t_d, q)
}

/// [`assess`] reusing a [`RateProfile`] built for the same `x`, `y` and hazard.
pub fn assess_with_profile(
    profile: &RateProfile,
    x: &LognormalSpec,
    y: &LognormalSpec,
    hazard: &HazardModel,
    margin: Option<f64>,
    t_d: f64,
    q: &QuadratureSettings,
) -> Result<RiskReport> {
    check_time(t_d)?;
    let lambda_rtr = annual_rate(x, hazard, q)?;
    let lambda_ensemble = annual_rate(&compose(x, y), hazard, q)?;
    let lambda_exact = profile.exact_rate()?;
    let pf_rtr = lifetime_from_rate(lambda_rtr, t_d);
    let pf_exact = profile.lifetime(t_d)?;
    let pf_ensemble = lifetime_from_rate(lambda_ensemble, t_d);
    let margin = margin.or_else(|| derived_margin(x, hazard));
    let error_parameter = match margin {
        Some(m) if x.dispersion > 0.0 => Some(error_parameter(x, y, m)?),
        _ => None,
    };
    Ok(RiskReport {
        t_d,
        lambda_rtr,
        lambda_exact,
        lambda_ensemble,
        pf_rtr,
        pf_exact,
        pf_ensemble,
        ratio_lambda: lambda_exact / lambda_rtr,
        ratio_pf: pf_exact / pf_rtr,
        err_pct_pf: err_pct_pf(pf_ensemble, pf_exact)?,
        err_pct_lambda: err_pct_lambda(lambda_ensemble, lambda_exact)?,
        error_parameter,
        var_product: profile.variance_product(t_d)?,
    })
}
