//! Closed-form toy problem: lognormal pulses `S` arriving at rate `η`
//! against a capacity `X · Y`, with failure when `x·y ≤ s`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{std_normal_cdf, std_normal_pdf, LognormalSpec};
use crate::quad;
use crate::riskengine::{err_pct_pf, lifetime_from_rate, QuadratureSettings};

/// How a per-pulse failure probability `p = Φ(−β)` becomes a rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// `η·p·(1 − p)`, with the extra factor carried by the closed forms.
    #[default]
    Printed,
    /// `η·p`, the rate of pulses that fail the structure.
    Plain,
}

impl RateConvention {
    fn apply(self, eta: f64, p: f64) -> f64 {
        match self {
            RateConvention::Printed => eta * p * (1.0 - p),
            RateConvention::Plain => eta * p,
        }
    }
}

impl FromStr for RateConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(Self::Printed),
            "plain" => Ok(Self::Plain),
            _ => Err(Error::Config(format!("unknown rate convention `{s}` (expected printed or plain)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyCase {
    /// `m_S = 1`, `σ_lnY = 0.4`; the reference problem.
    A,
    /// `m_S = 1`, `σ_lnY = 0.2`.
    B,
    /// `m_S = 2`, `σ_lnY = 0.2`.
    C,
}

impl FromStr for ToyCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ref" | "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            _ => Err(Error::Config(format!("unknown toy case `{s}` (expected ref, a, b or c)"))),
        }
    }
}

impl fmt::Display for ToyCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToyCase::A => "a",
            ToyCase::B => "b",
            ToyCase::C => "c",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyProblem {
    /// Pulses per year.
    pub eta: f64,
    pub s: LognormalSpec,
    pub x: LognormalSpec,
    pub y: LognormalSpec,
    #[serde(default)]
    pub convention: RateConvention,
}

impl Default for ToyProblem {
    fn default() -> Self {
        Self {
            eta: 1e-2,
            s: LognormalSpec { median: 1.0, dispersion: 1.0 },
            x: LognormalSpec { median: 4.0, dispersion: 0.4 },
            y: LognormalSpec { median: 0.85, dispersion: 0.4 },
            convention: RateConvention::Printed,
        }
    }
}

impl ToyProblem {
    pub fn case(case: ToyCase) -> Self {
        let base = Self::default();
        match case {
            ToyCase::A => base,
            ToyCase::B => Self { y: LognormalSpec { dispersion: 0.2, ..base.y }, ..base },
            ToyCase::C => Self {
                s: LognormalSpec { median: 2.0, ..base.s },
                y: LognormalSpec { dispersion: 0.2, ..base.y },
                ..base
            },
        }
    }

    pub fn with_convention(self, convention: RateConvention) -> Self {
        Self { convention, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::domain(format!("pulse rate must be non-negative, got {}", self.eta)));
        }
        self.s.validate()?;
        self.x.validate()?;
        self.y.validate()
    }

    /// `β_XY` for one pulse.
    pub fn beta_xy(&self) -> Result<f64> {
        let var = self.x.dispersion.powi(2) + self.y.dispersion.powi(2) + self.s.dispersion.powi(2);
        if var == 0.0 {
            return Err(Error::domain("toy problem needs at least one positive dispersion"));
        }
        Ok((self.x.log_mean() + self.y.log_mean() - self.s.log_mean()) / var.sqrt())
    }

    /// `β_X(y)` for a structure with `Y = y_value`.
    pub fn beta_x(&self, y_value: f64) -> Result<f64> {
        if !(y_value > 0.0) {
            return Err(Error::domain(format!("y must be positive, got {y_value}")));
        }
        let var = self.x.dispersion.powi(2) + self.s.dispersion.powi(2);
        if var == 0.0 {
            return Err(Error::domain("conditional rate needs a positive dispersion in X or S"));
        }
        Ok((self.x.log_mean() + y_value.ln() - self.s.log_mean()) / var.sqrt())
    }
}

pub fn limit_state(s: f64, x: f64, y: f64) -> f64 {
    x * y / s - 1.0
}

pub fn toy_ensemble_rate(p: &ToyProblem) -> Result<f64> {
    p.validate()?;
    Ok(p.convention.apply(p.eta, std_normal_cdf(-p.beta_xy()?)))
}

pub fn toy_conditional_rate(p: &ToyProblem, y_value: f64) -> Result<f64> {
    p.validate()?;
    Ok(p.convention.apply(p.eta, std_normal_cdf(-p.beta_x(y_value)?)))
}

pub fn toy_ensemble_pf(p: &ToyProblem, t_d: f64) -> Result<f64> {
    Ok(lifetime_from_rate(toy_ensemble_rate(p)?, t_d))
}

fn check_time(t_d: f64) -> Result<()> {
    if t_d > 0.0 && t_d.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("exposure time must be positive, got {t_d}")))
    }
}

/// `E_Y[g(λ(Y))]` on the outer grid.
fn over_y(p: &ToyProblem, q: &QuadratureSettings, name: &'static str, g: impl Fn(f64) -> f64) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if p.y.is_degenerate() {
        return Ok(g(toy_conditional_rate(p, p.y.median)?));
    }
    let values = quad::nodes(-q.u_span, q.u_span, q.n_outer)
        .map(|u| Ok(std_normal_pdf(u) * g(toy_conditional_rate(p, p.y.at_std(u))?)))
        .collect::<Result<Vec<f64>>>()?;
    let (est, rel) = quad::simpson_checked(&values, 2.0 * q.u_span / (q.n_outer - 1) as f64);
    if rel > q.rel_tol {
        return Err(Error::NonConvergence { integral: name, residual: rel });
    }
    Ok(est)
}

/// Exact lifetime probability `E_Y[1 − exp(−λ(Y) t)]` with the closed-form
/// conditional rate.
pub fn toy_exact_pf(p: &ToyProblem, t_d: f64, q: &QuadratureSettings) -> Result<f64> {
    check_time(t_d)?;
    over_y(p, q, "toy lifetime probability", |r| lifetime_from_rate(r, t_d))
}

/// `E_Y[λ(Y)]`. Equal to [`toy_ensemble_rate`] only under the plain
/// convention; the printed `(1 − p)` factor is not linear in `p`.
pub fn toy_mean_conditional_rate(p: &ToyProblem, q: &QuadratureSettings) -> Result<f64> {
    over_y(p, q, "toy mean conditional rate", |r| r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepAxis {
    /// Vary `σ_lnY` at a fixed exposure time.
    SigmaLnY { t_d: f64 },
    /// Vary the exposure time.
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis: f64,
    pub pf_exact: f64,
    pub pf_ensemble: f64,
    pub err_pct: f64,
}

pub fn toy_error_sweep(p: &ToyProblem, axis: SweepAxis, grid: &[f64], q: &QuadratureSettings) -> Result<Vec<SweepRow>> {
    p.validate()?;
    q.validate()?;
    grid.par_iter()
        .map(|&v| {
            let (problem, t_d) = match axis {
                SweepAxis::SigmaLnY { t_d } => {
                    let y = LognormalSpec::new(p.y.median, v)?;
                    (ToyProblem { y, ..*p }, t_d)
                }
                SweepAxis::Time => (*p, v),
            };
            let pf_exact = toy_exact_pf(&problem, t_d, q)?;
            let pf_ensemble = toy_ensemble_pf(&problem, t_d)?;
            Ok(SweepRow { axis: v, pf_exact, pf_ensemble, err_pct: err_pct_pf(pf_ensemble, pf_exact)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn limit_state_examples() {
        assert!((limit_state(1.0, 4.0, 0.85) - 2.4).abs() < 1e-14);
        assert_eq!(limit_state(3.4, 4.0, 0.85), 0.0);
        assert_eq!(limit_state(2.0, 2.0, 1.0), 0.0);
    }

    #[test]
    fn ensemble_rate_reference() {
        let p = ToyProblem::default();
        assert!((p.beta_xy().unwrap() - 1.0651597927647514).abs() < 1e-14);
        let printed = toy_ensemble_rate(&p).unwrap();
        assert!(rel(printed, 1.2283773269914494e-3) < 1e-12);
        assert!(rel(printed, 1.2285e-3) < 1e-3);
        let plain = toy_ensemble_rate(&p.with_convention(RateConvention::Plain)).unwrap();
        assert!(rel(plain, 1.4340181253846080e-3) < 1e-12);
    }

    #[test]
    fn ensemble_rate_edge_cases() {
        let p = ToyProblem { eta: 0.0, ..Default::default() };
        assert_eq!(toy_ensemble_rate(&p).unwrap(), 0.0);
        let flat = LognormalSpec { median: 1.0, dispersion: 0.0 };
        let p = ToyProblem { s: flat, x: LognormalSpec { dispersion: 0.0, ..flat }, y: flat, ..Default::default() };
        assert!(toy_ensemble_rate(&p).is_err());
        let base = ToyProblem::default();
        let scaled = ToyProblem {
            s: LognormalSpec { median: 3.0, ..base.s },
            x: LognormalSpec { median: 12.0, ..base.x },
            ..base
        };
        assert!(rel(toy_ensemble_rate(&scaled).unwrap(), toy_ensemble_rate(&base).unwrap()) < 1e-12);
    }

    #[test]
    fn conditional_rate_reference() {
        let p = ToyProblem::default();
        assert!((p.beta_x(0.85).unwrap() - 1.1362469631391819).abs() < 1e-14);
        let r = toy_conditional_rate(&p, 0.85).unwrap();
        assert!(rel(r, 1.1156139271164033e-3) < 1e-12);
        assert!(rel(r, 1.1155e-3) < 1e-3);
        let plain = toy_conditional_rate(&p.with_convention(RateConvention::Plain), 0.85).unwrap();
        assert!(rel(plain, 1.2792661034634623e-3) < 1e-12);
        assert!(toy_conditional_rate(&p, 1e300).unwrap() < 1e-300);
        // β = 0 at ln y = ln m_S − ln m_X
        assert!(rel(toy_conditional_rate(&p, 0.25).unwrap(), 0.25e-2) < 1e-14);
    }

    #[test]
    fn exact_pf_reference() {
        let p = ToyProblem::default();
        assert!(rel(toy_exact_pf(&p, 50.0, &q()).unwrap(), 0.056128817757586380) < 1e-8);
        let plain = p.with_convention(RateConvention::Plain);
        assert!(rel(toy_exact_pf(&plain, 50.0, &q()).unwrap(), 0.068429749092612442) < 1e-8);
        assert!(rel(toy_exact_pf(&plain, 1.0, &q()).unwrap(), 0.0014326593762392444) < 1e-8);
    }

    #[test]
    fn degenerate_y_is_single_rate() {
        let p = ToyProblem { y: LognormalSpec { median: 0.85, dispersion: 0.0 }, ..Default::default() };
        let want = lifetime_from_rate(toy_conditional_rate(&p, 0.85).unwrap(), 50.0);
        assert_eq!(toy_exact_pf(&p, 50.0, &q()).unwrap(), want);
        let rows = toy_error_sweep(&ToyProblem::default(), SweepAxis::SigmaLnY { t_d: 50.0 }, &[0.0], &q()).unwrap();
        assert!(rows[0].err_pct.abs() < 1e-12);
    }

    #[test]
    fn linearity_gap_depends_on_convention() {
        let p = ToyProblem::default();
        let plain = p.with_convention(RateConvention::Plain);
        let mean = toy_mean_conditional_rate(&plain, &q()).unwrap();
        assert!(rel(mean, toy_ensemble_rate(&plain).unwrap()) < 1e-9);
        // with the (1 − p) factor the ensemble rate is about 5.7% above the mean
        let gap = toy_ensemble_rate(&p).unwrap() / toy_mean_conditional_rate(&p, &q()).unwrap() - 1.0;
        assert!((gap - 0.0571).abs() < 5e-4, "{gap}");
    }

    #[test]
    fn case_c_error_is_flat_over_time() {
        let p = ToyProblem::case(ToyCase::C);
        let grid: Vec<f64> = (0..=40).map(|i| 10f64.powf(i as f64 / 40.0 * 3.0 - 1.0)).collect();
        let rows = toy_error_sweep(&p, SweepAxis::Time, &grid, &q()).unwrap();
        let kept: Vec<_> = rows.iter().filter(|r| (1e-3..=0.1).contains(&r.pf_exact)).collect();
        assert!(kept.len() > 10);
        assert!(kept.first().unwrap().pf_exact < 2e-3 && kept.last().unwrap().pf_exact > 0.08);
        for r in kept {
            assert!((1.0..=3.0).contains(&r.err_pct), "{r:?}");
        }
    }

    #[test]
    fn error_grows_with_sigma_y() {
        let grid: Vec<f64> = (0..8).map(|i| 0.1 * 1.2f64.powi(i)).collect();
        for conv in [RateConvention::Printed, RateConvention::Plain] {
            let p = ToyProblem::default().with_convention(conv);
            let rows = toy_error_sweep(&p, SweepAxis::SigmaLnY { t_d: 50.0 }, &grid, &q()).unwrap();
            for w in rows.windows(2) {
                assert!(w[1].err_pct > w[0].err_pct, "{conv:?} {w:?}");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("ref".parse::<ToyCase>().unwrap(), ToyCase::A);
        assert_eq!("c".parse::<ToyCase>().unwrap(), ToyCase::C);
        assert!("d".parse::<ToyCase>().is_err());
        assert_eq!("plain".parse::<RateConvention>().unwrap(), RateConvention::Plain);
    }
}
