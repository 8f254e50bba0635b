//! Fitting hazard curves to published rate targets.
//!
//! The published hazard curves behind reported collapse rates are rarely
//! available, so curves are recovered from what is: point values of `H`
//! and annual failure rates induced by known fragilities.

use std::cmp::Ordering;

use super::{HazardModel, LogQuadratic, PowerLaw, POWER_LAW_CAP_RATE};
use crate::error::{Error, Result};
use crate::probcore::LognormalSpec;
use crate::riskengine::{annual_rate, QuadratureSettings};
use crate::solve;

const K_MIN: f64 = 0.05;
const K_MAX: f64 = 20.0;
const K_SCAN: usize = 160;
const FIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// `H(im) = rate`.
    Exceedance { im: f64, rate: f64 },
    /// Annual failure rate of `capacity` under the fitted curve equals `rate`.
    AnnualRate { capacity: LognormalSpec, rate: f64 },
}

impl Constraint {
    pub fn target(&self) -> f64 {
        match *self {
            Constraint::Exceedance { rate, .. } | Constraint::AnnualRate { rate, .. } => rate,
        }
    }

    pub fn evaluate(&self, hazard: &HazardModel, q: &QuadratureSettings) -> Result<f64> {
        match self {
            Constraint::Exceedance { im, .. } => hazard.exceedance(*im),
            Constraint::AnnualRate { capacity, .. } => annual_rate(capacity, hazard, q),
        }
    }

    fn key(&self) -> (u8, f64, f64, f64) {
        match *self {
            Constraint::Exceedance { im, rate } => (0, im, 0.0, rate),
            Constraint::AnnualRate { capacity, rate } => (1, capacity.median, capacity.dispersion, rate),
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
    }

    fn validate(&self) -> Result<()> {
        let rate = self.target();
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!("calibration target must be positive, got {rate}")));
        }
        match self {
            Constraint::Exceedance { im, rate } => {
                if !(*im > 0.0 && im.is_finite()) {
                    return Err(Error::domain(format!("anchor intensity must be positive, got {im}")));
                }
                if *rate >= POWER_LAW_CAP_RATE {
                    return Err(Error::domain("anchor rate lies on the power-law plateau"));
                }
                Ok(())
            }
            Constraint::AnnualRate { capacity, .. } => capacity.validate(),
        }
    }
}

/// Scale `k0` that satisfies `c` exactly for slope `k`.
fn scale_for_slope(c: &Constraint, k: f64, q: &QuadratureSettings) -> Result<f64> {
    match *c {
        Constraint::Exceedance { im, rate } => Ok(rate * im.powf(k)),
        Constraint::AnnualRate { capacity, rate } => {
            let s = capacity.dispersion;
            let mut k0 = rate * capacity.median.powf(k) * (-0.5 * k * k * s * s).exp();
            for _ in 0..100 {
                if !(k0.is_finite() && k0 > 0.0) {
                    break;
                }
                let got = c.evaluate(&HazardModel::PowerLaw(PowerLaw::new(k0, k)?), q)?;
                if !(got > 0.0) {
                    break;
                }
                let ratio = rate / got;
                k0 *= ratio;
                if (ratio - 1.0).abs() < 1e-14 {
                    return Ok(k0);
                }
            }
            Err(Error::Calibration { reason: format!("no power-law scale satisfies the rate target at k={k}"), residual: f64::NAN })
        }
    }
}

/// Power law `(k0, k)` satisfying exactly two independent constraints.
///
/// The slope is found by bracketing on `k ∈ [0.05, 20]`; when several slopes
/// fit, the steepest is returned. The result does not depend on the order in
/// which the constraints are given.
pub fn calibrate_power_law(constraints: &[Constraint], q: &QuadratureSettings) -> Result<PowerLaw> {
    let [a, b] = constraints else {
        return Err(Error::domain(format!("power-law calibration needs exactly two constraints, got {}", constraints.len())));
    };
    a.validate()?;
    b.validate()?;
    q.validate()?;
    let mut pair = [*a, *b];
    pair.sort_by(Constraint::canonical_cmp);
    let [first, second] = pair;
    if let (Constraint::Exceedance { im: i1, .. }, Constraint::Exceedance { im: i2, .. }) = (first, second) {
        if i1 == i2 {
            return Err(Error::domain("two anchors at the same intensity are not independent"));
        }
    }

    let law_at = |k: f64| -> Result<PowerLaw> { PowerLaw::new(scale_for_slope(&first, k, q)?, k) };
    let residual = |k: f64| -> Result<f64> {
        let got = second.evaluate(&HazardModel::PowerLaw(law_at(k)?), q)?;
        Ok((got / second.target()).ln())
    };

    let ks: Vec<f64> = (0..K_SCAN)
        .map(|i| K_MIN * (K_MAX / K_MIN).powf(i as f64 / (K_SCAN - 1) as f64))
        .collect();
    let scan: Vec<Option<f64>> = ks.iter().map(|&k| residual(k).ok().filter(|r| r.is_finite())).collect();
    let best = scan.iter().flatten().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
    let bracket = (0..K_SCAN - 1).rev().find(|&i| match (scan[i], scan[i + 1]) {
        (Some(l), Some(r)) => l == 0.0 || l.signum() != r.signum(),
        _ => false,
    });
    let Some(i) = bracket else {
        return Err(Error::Calibration { reason: "no slope in [0.05, 20] satisfies both constraints".into(), residual: best });
    };
    let k = solve::brent(residual, ks[i], ks[i + 1], 1e-13, 200)?;
    let law = law_at(k)?;
    let model = HazardModel::PowerLaw(law);
    for c in [&first, &second] {
        let rel = (c.evaluate(&model, q)? / c.target() - 1.0).abs();
        if rel > FIT_TOL {
            return Err(Error::Calibration { reason: "fitted power law misses a constraint".into(), residual: rel });
        }
    }
    Ok(law)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFamily {
    PowerLaw,
    LogQuadratic,
}

/// Least-squares fit of a hazard curve to annual-rate targets, minimising
/// the squared log-ratios `ln(λ_model / λ_target)`.
pub fn fit_log_rates(
    targets: &[(LognormalSpec, f64)],
    family: CurveFamily,
    q: &QuadratureSettings,
) -> Result<HazardModel> {
    let need = match family {
        CurveFamily::PowerLaw => 2,
        CurveFamily::LogQuadratic => 3,
    };
    if targets.len() < need {
        return Err(Error::domain(format!("{family:?} fit needs at least {need} targets, got {}", targets.len())));
    }
    for (cap, rate) in targets {
        Constraint::AnnualRate { capacity: *cap, rate: *rate }.validate()?;
    }
    let residuals = |model: &HazardModel| -> Result<Vec<f64>> {
        targets
            .iter()
            .map(|(cap, rate)| annual_rate(cap, model, q).map(|got| (got / rate).ln()))
            .collect()
    };

    // power-law start from the outermost targets by rate
    let lo = targets.iter().min_by(|a, b| a.1.total_cmp(&b.1)).copied().unwrap();
    let hi = targets.iter().max_by(|a, b| a.1.total_cmp(&b.1)).copied().unwrap();
    let start = calibrate_power_law(
        &[
            Constraint::AnnualRate { capacity: lo.0, rate: lo.1 },
            Constraint::AnnualRate { capacity: hi.0, rate: hi.1 },
        ],
        q,
    )
    .unwrap_or(PowerLaw::new(lo.1, 3.0)?);

    let power = |p: &[f64]| PowerLaw::new(p[0].exp(), p[1]).map(HazardModel::PowerLaw);
    let (p, _) = solve::levenberg_marquardt(|p| residuals(&power(p)?), &[start.k0.ln(), start.k], 200)?;
    let power_fit = power(&p)?;
    if family == CurveFamily::PowerLaw {
        return Ok(power_fit);
    }

    let quad = |p: &[f64]| LogQuadratic::new(p[0], p[1], p[2]).map(HazardModel::LogQuadratic);
    let HazardModel::PowerLaw(pl) = power_fit else { unreachable!() };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for a2 in [0.0, -0.25, -0.5, -1.0, -2.0] {
        let start = [pl.k0.ln(), -pl.k, a2];
        if let Ok((p, cost)) = solve::levenberg_marquardt(|p| residuals(&quad(p)?), &start, 300) {
            if best.as_ref().is_none_or(|b| cost < b.1) {
                best = Some((p, cost));
            }
        }
    }
    let (p, _) = best.ok_or(Error::Calibration { reason: "log-quadratic fit failed from every start".into(), residual: f64::NAN })?;
    quad(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragility::compose;

    fn q() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn recovers_point_constrained_law() {
        let h1 = 4.04e-4;
        let cons = [
            Constraint::Exceedance { im: 0.805, rate: h1 },
            Constraint::Exceedance { im: 1.61, rate: h1 / 8.0 },
        ];
        let law = calibrate_power_law(&cons, &q()).unwrap();
        assert!((law.k - 3.0).abs() < 1e-9);
        assert!((law.k0 / (h1 * 0.805f64.powi(3)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rate_targets_case_one() {
        let x = LognormalSpec::new(1.7, 0.30).unwrap();
        let z = compose(&x, &LognormalSpec::new(1.0, 0.5).unwrap());
        let cons = [
            Constraint::AnnualRate { capacity: x, rate: 0.215e-4 },
            Constraint::AnnualRate { capacity: z, rate: 2.569e-4 },
        ];
        let law = calibrate_power_law(&cons, &q()).unwrap();
        let h = HazardModel::PowerLaw(law);
        for c in &cons {
            let got = c.evaluate(&h, &q()).unwrap();
            assert!((got / c.target() - 1.0).abs() < 1e-6);
        }
        let swapped = calibrate_power_law(&[cons[1], cons[0]], &q()).unwrap();
        assert_eq!(law, swapped);
    }

    #[test]
    fn recovers_known_law_from_its_rates() {
        let truth = HazardModel::PowerLaw(PowerLaw::new(2.3e-4 * 0.5f64.powf(2.6), 2.6).unwrap());
        let a = LognormalSpec::new(0.8, 0.35).unwrap();
        let b = LognormalSpec::new(0.5, 0.6).unwrap();
        let cons = [
            Constraint::AnnualRate { capacity: a, rate: annual_rate(&a, &truth, &q()).unwrap() },
            Constraint::AnnualRate { capacity: b, rate: annual_rate(&b, &truth, &q()).unwrap() },
        ];
        let law = calibrate_power_law(&cons, &q()).unwrap();
        let HazardModel::PowerLaw(t) = truth else { unreachable!() };
        assert!((law.k / t.k - 1.0).abs() < 1e-6);
        assert!((law.k0 / t.k0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_wrong_arity_and_unreachable_targets() {
        let c = Constraint::Exceedance { im: 1.0, rate: 1e-3 };
        assert!(calibrate_power_law(&[c], &q()).is_err());
        assert!(calibrate_power_law(&[c, c], &q()).is_err());
        // a weaker structure with a lower rate cannot come from a decreasing curve
        let strong = LognormalSpec::new(2.0, 0.3).unwrap();
        let weak = LognormalSpec::new(0.5, 0.3).unwrap();
        let err = calibrate_power_law(
            &[
                Constraint::AnnualRate { capacity: strong, rate: 1e-3 },
                Constraint::AnnualRate { capacity: weak, rate: 1e-5 },
            ],
            &q(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Calibration { .. }), "{err:?}");
    }

    #[test]
    fn log_quadratic_fit_recovers_curve() {
        let truth = HazardModel::LogQuadratic(LogQuadratic::new(-9.0, -6.0, -1.5).unwrap());
        let caps = [
            LognormalSpec::new(1.7, 0.3).unwrap(),
            LognormalSpec::new(1.7, 0.58).unwrap(),
            LognormalSpec::new(2.8, 0.34).unwrap(),
            LognormalSpec::new(2.8, 0.6).unwrap(),
        ];
        let targets: Vec<_> = caps.iter().map(|c| (*c, annual_rate(c, &truth, &q()).unwrap())).collect();
        let fit = fit_log_rates(&targets, CurveFamily::LogQuadratic, &q()).unwrap();
        for (c, rate) in &targets {
            let got = annual_rate(c, &fit, &q()).unwrap();
            assert!((got / rate - 1.0).abs() < 1e-5, "{fit:?}");
        }
    }
}
