//! Annual exceedance curves `H(im)` and their densities `h(im) = |dH/dim|`.
//!
//! Intensity is in g, rates in events per year. Every model is
//! nonincreasing in `im`. Models that diverge as `im → 0` are held flat
//! below a plateau point, so `H(0⁺)` is the total annual event rate and the
//! density vanishes there.

mod calibrate;
mod table;

pub use calibrate::{calibrate_power_law, fit_log_rates, Constraint, CurveFamily};
pub use table::HazardTable;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::{lognormal_pdf, std_normal_cdf, std_normal_quantile, LognormalSpec};

/// Annual rate of the 2%-in-50-years intensity under Poisson arrivals.
pub fn two_in_fifty_rate() -> f64 {
    -(0.98f64).ln() / 50.0
}

/// Rate at which a [`PowerLaw`]'s default plateau starts.
pub const POWER_LAW_CAP_RATE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HazardModel {
    /// Poisson pulses at rate `eta` with lognormal intensity:
    /// `H(im) = eta · (1 − F_S(im))`.
    PulseLognormal { eta: f64, intensity: LognormalSpec },
    PowerLaw(PowerLaw),
    LogQuadratic(LogQuadratic),
    Tabulated(HazardTable),
}

/// `H(im) = k0 · im^(−k)` for `im ≥ im_min`, flat below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub k0: f64,
    pub k: f64,
    pub im_min: f64,
}

impl PowerLaw {
    /// Plateau placed where the curve reaches [`POWER_LAW_CAP_RATE`].
    pub fn new(k0: f64, k: f64) -> Result<Self> {
        if !(k0 > 0.0 && k0.is_finite() && k > 0.0 && k.is_finite()) {
            return Err(Error::domain(format!("power law needs k0 > 0 and k > 0, got ({k0}, {k})")));
        }
        let im_min = (k0 / POWER_LAW_CAP_RATE).powf(1.0 / k);
        Ok(Self { k0, k, im_min })
    }

    pub fn with_im_min(k0: f64, k: f64, im_min: f64) -> Result<Self> {
        let mut law = Self::new(k0, k)?;
        if !(im_min > 0.0 && im_min.is_finite()) {
            return Err(Error::domain(format!("im_min must be positive, got {im_min}")));
        }
        law.im_min = im_min;
        Ok(law)
    }

    fn raw(&self, im: f64) -> f64 {
        self.k0 * im.powf(-self.k)
    }
}

/// Second-order fit in log-log space, `ln H = a0 + a1·ln im + a2·ln² im`
/// with `a2 ≤ 0`, held flat below its vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogQuadratic {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl LogQuadratic {
    pub fn new(a0: f64, a1: f64, a2: f64) -> Result<Self> {
        if ![a0, a1, a2].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("log-quadratic coefficients must be finite"));
        }
        if a2 > 0.0 || (a2 == 0.0 && a1 >= 0.0) {
            return Err(Error::domain(format!(
                "log-quadratic hazard must decrease at large intensity (a1={a1}, a2={a2})"
            )));
        }
        Ok(Self { a0, a1, a2 })
    }

    /// Log-intensity of the vertex, if the curve has one.
    fn vertex(&self) -> Option<f64> {
        (self.a2 < 0.0).then(|| -self.a1 / (2.0 * self.a2))
    }

    fn clamp_log(&self, l: f64) -> f64 {
        self.vertex().map_or(l, |v| l.max(v))
    }

    fn log_rate(&self, l: f64) -> f64 {
        let l = self.clamp_log(l);
        self.a0 + l * (self.a1 + self.a2 * l)
    }

    /// `d ln H / d ln im`.
    fn log_slope(&self, l: f64) -> f64 {
        match self.vertex() {
            Some(v) if l <= v => 0.0,
            _ => self.a1 + 2.0 * self.a2 * l,
        }
    }
}

fn check_im(im: f64) -> Result<()> {
    if im > 0.0 && im.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("intensity must be positive, got {im}")))
    }
}

impl HazardModel {
    pub fn pulse(eta: f64, intensity: LognormalSpec) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::domain(format!("pulse rate must be non-negative, got {eta}")));
        }
        intensity.validate()?;
        if intensity.is_degenerate() {
            return Err(Error::domain("pulse intensity needs a positive dispersion"));
        }
        Ok(HazardModel::PulseLognormal { eta, intensity })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HazardModel::PulseLognormal { eta, intensity } => Self::pulse(*eta, *intensity).map(|_| ()),
            HazardModel::PowerLaw(p) => PowerLaw::with_im_min(p.k0, p.k, p.im_min).map(|_| ()),
            HazardModel::LogQuadratic(q) => LogQuadratic::new(q.a0, q.a1, q.a2).map(|_| ()),
            HazardModel::Tabulated(t) => t.validate(),
        }
    }

    /// Annual rate of events with intensity at least `im`.
    pub fn exceedance(&self, im: f64) -> Result<f64> {
        check_im(im)?;
        Ok(match self {
            HazardModel::PulseLognormal { eta, intensity } => {
                eta * std_normal_cdf(-(im / intensity.median).ln() / intensity.dispersion)
            }
            HazardModel::PowerLaw(p) => p.raw(im.max(p.im_min)),
            HazardModel::LogQuadratic(q) => q.log_rate(im.ln()).exp(),
            HazardModel::Tabulated(t) => t.exceedance(im)?,
        })
    }

    /// Hazard density `|dH/dim|` in 1/(year·g).
    pub fn density(&self, im: f64) -> Result<f64> {
        check_im(im)?;
        Ok(match self {
            HazardModel::PulseLognormal { eta, intensity } => eta * lognormal_pdf(intensity, im)?,
            HazardModel::PowerLaw(p) => {
                if im < p.im_min {
                    0.0
                } else {
                    p.k * p.raw(im) / im
                }
            }
            HazardModel::LogQuadratic(q) => {
                let l = im.ln();
                -q.log_slope(l) * q.log_rate(l).exp() / im
            }
            HazardModel::Tabulated(t) => t.density(im)?,
        })
    }

    /// Intensity range on which the model is defined.
    pub fn support(&self) -> (f64, f64) {
        match self {
            HazardModel::Tabulated(t) => t.support(),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Point below which the curve is flat, with the flat rate.
    pub fn plateau(&self) -> Option<(f64, f64)> {
        match self {
            HazardModel::PowerLaw(p) => Some((p.im_min, p.k0 * p.im_min.powf(-p.k))),
            HazardModel::LogQuadratic(q) => q.vertex().map(|v| (v.exp(), q.log_rate(v).exp())),
            _ => None,
        }
    }

    /// Intensities where the log-log slope jumps (knots, plateau points).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            HazardModel::Tabulated(t) => t.ims().to_vec(),
            _ => self.plateau().map(|(im, _)| vec![im]).unwrap_or_default(),
        }
    }

    /// Intensity whose exceedance rate equals `rate`, when the curve reaches it.
    pub fn intensity_at_rate(&self, rate: f64) -> Option<f64> {
        if !(rate > 0.0) {
            return None;
        }
        match self {
            HazardModel::PulseLognormal { eta, intensity } => {
                (rate < *eta)
                    .then(|| std_normal_quantile(rate / eta).ok().map(|u| intensity.at_std(-u)))
                    .flatten()
            }
            HazardModel::PowerLaw(p) => {
                let im = (p.k0 / rate).powf(1.0 / p.k);
                (im >= p.im_min).then_some(im)
            }
            HazardModel::LogQuadratic(q) => {
                let target = rate.ln();
                let floor = q.vertex().unwrap_or(f64::NEG_INFINITY);
                if target > q.log_rate(floor.max(-700.0)) {
                    return None;
                }
                if q.a2 == 0.0 {
                    return Some(((target - q.a0) / q.a1).exp());
                }
                // larger root of a2 l² + a1 l + (a0 − ln r) = 0
                let disc = q.a1 * q.a1 - 4.0 * q.a2 * (q.a0 - target);
                (disc >= 0.0).then(|| ((-q.a1 - disc.sqrt()) / (2.0 * q.a2)).exp())
            }
            HazardModel::Tabulated(t) => t.intensity_at_rate(rate),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn pulse() -> HazardModel {
        HazardModel::pulse(1e-2, LognormalSpec::new(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn json_round_trip() {
        let models = [
            pulse(),
            HazardModel::PowerLaw(PowerLaw::new(1e-5, 2.5).unwrap()),
            HazardModel::LogQuadratic(LogQuadratic::new(-9.0, -3.0, -0.5).unwrap()),
            HazardModel::Tabulated(HazardTable::new(&[(0.1, 1e-2), (1.0, 1e-4)], true).unwrap()),
        ];
        for m in &models {
            let text = serde_json::to_string(m).unwrap();
            let back: HazardModel = serde_json::from_str(&text).unwrap();
            assert_eq!(&back, m, "{text}");
        }
        assert!(serde_json::to_string(&models[1]).unwrap().starts_with(r#"{"power_law":"#));
    }

    #[test]
    fn pulse_exceedance_and_density() {
        let h = pulse();
        assert!((h.exceedance(1.0).unwrap() - 5e-3).abs() < 1e-15);
        assert!((h.density(1.0).unwrap() - 3.989_422_804e-3).abs() < 1e-12);
        assert!(h.exceedance(0.0).is_err());
        assert!(h.exceedance(-1.0).is_err());
    }

    #[test]
    fn anchor_rate() {
        assert!((two_in_fifty_rate() - 4.0405e-4).abs() < 1e-8);
        let law = PowerLaw::new(two_in_fifty_rate() * 0.805f64.powi(3), 3.0).unwrap();
        let h = HazardModel::PowerLaw(law);
        assert!((h.exceedance(0.805).unwrap() - 4.04e-4).abs() < 1e-6);
    }

    #[test]
    fn power_law_identity_and_plateau() {
        let law = PowerLaw::new(2e-4, 2.5).unwrap();
        assert!((law.k0 * law.im_min.powf(-law.k) - POWER_LAW_CAP_RATE).abs() < 1e-9);
        let h = HazardModel::PowerLaw(law);
        for im in [0.05, 0.3, 1.0, 4.0] {
            let ratio = im * h.density(im).unwrap() / h.exceedance(im).unwrap();
            assert!((ratio - 2.5).abs() < 1e-12);
        }
        let below = law.im_min * 0.5;
        assert_eq!(h.exceedance(below).unwrap(), h.exceedance(law.im_min).unwrap());
        assert_eq!(h.density(below).unwrap(), 0.0);
    }

    #[test]
    fn density_integrates_to_exceedance_drop() {
        let models = [
            pulse(),
            HazardModel::PowerLaw(PowerLaw::new(2e-4, 2.5).unwrap()),
            HazardModel::LogQuadratic(LogQuadratic::new(-9.0, -6.2, -1.9).unwrap()),
        ];
        for h in &models {
            let (a, b) = (0.2f64, 3.0f64);
            // split at any breakpoint inside so Simpson sees smooth pieces
            let mut cuts = vec![a.ln()];
            cuts.extend(h.breakpoints().into_iter().filter(|p| *p > a && *p < b).map(f64::ln));
            cuts.push(b.ln());
            let mut total = 0.0;
            for w in cuts.windows(2) {
                total += quad::simpson_fn(w[0], w[1], 4001, |l| h.density(l.exp()).unwrap() * l.exp());
            }
            let drop = h.exceedance(a).unwrap() - h.exceedance(b).unwrap();
            assert!((total - drop).abs() < 1e-8 * drop.max(1e-300) + 1e-14, "{h:?}: {total} vs {drop}");
        }
    }

    #[test]
    fn density_matches_finite_difference() {
        let models = [
            pulse(),
            HazardModel::PowerLaw(PowerLaw::new(2e-4, 2.5).unwrap()),
            HazardModel::LogQuadratic(LogQuadratic::new(-9.0, -6.2, -1.9).unwrap()),
        ];
        for h in &models {
            for im in [0.3, 0.7, 1.3, 2.9] {
                let d = im * 1e-5;
                let fd = (h.exceedance(im - d).unwrap() - h.exceedance(im + d).unwrap()) / (2.0 * d);
                let an = h.density(im).unwrap();
                assert!(((fd - an) / an).abs() < 1e-4, "{h:?} at {im}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn intensity_at_rate_inverts() {
        let models = [
            pulse(),
            HazardModel::PowerLaw(PowerLaw::new(2e-4, 2.5).unwrap()),
            HazardModel::LogQuadratic(LogQuadratic::new(-9.0, -6.2, -1.9).unwrap()),
        ];
        for h in &models {
            let im = h.intensity_at_rate(two_in_fifty_rate()).unwrap();
            let back = h.exceedance(im).unwrap();
            assert!(((back - two_in_fifty_rate()) / back).abs() < 1e-10, "{h:?}");
        }
        assert!(pulse().intensity_at_rate(0.02).is_none());
    }

    #[test]
    fn log_quadratic_rejects_increasing_curves() {
        assert!(LogQuadratic::new(-9.0, -3.0, 0.1).is_err());
        assert!(LogQuadratic::new(-9.0, 1.0, 0.0).is_err());
        assert!(LogQuadratic::new(-9.0, -3.0, 0.0).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn models() -> impl Strategy<Value = HazardModel> {
            prop_oneof![
                (1e-4f64..1.0, 0.1f64..3.0, 0.2f64..1.5).prop_map(|(eta, m, s)| {
                    HazardModel::pulse(eta, LognormalSpec::new(m, s).unwrap()).unwrap()
                }),
                (1e-6f64..1e-2, 0.5f64..6.0).prop_map(|(k0, k)| HazardModel::PowerLaw(PowerLaw::new(k0, k).unwrap())),
                (-12.0f64..-6.0, -7.0f64..-1.0, -2.0f64..0.0)
                    .prop_map(|(a0, a1, a2)| HazardModel::LogQuadratic(LogQuadratic::new(a0, a1, a2).unwrap())),
                (1e-6f64..1e-2, 0.5f64..6.0).prop_map(|(k0, k)| {
                    let p = PowerLaw::new(k0, k).unwrap();
                    let lo = 1.5 * p.im_min;
                    HazardModel::Tabulated(HazardTable::sample(&HazardModel::PowerLaw(p), lo, 1e3 * lo, 50, true).unwrap())
                }),
            ]
        }

        proptest! {
            #[test]
            fn exceedance_nonincreasing(h in models(), pairs in proptest::collection::vec((0.01f64..10.0, 0.01f64..10.0), 100)) {
                for (a, b) in pairs {
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    let (hl, hh) = (h.exceedance(lo).unwrap(), h.exceedance(hi).unwrap());
                    prop_assert!(hh >= 0.0);
                    prop_assert!(hl >= hh * (1.0 - 1e-12), "{lo}->{hl}, {hi}->{hh}");
                }
            }
        }
    }
}
