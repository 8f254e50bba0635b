//! Seven reinforced-concrete moment frames with published fragility data,
//! their reference rates and probabilities, hazard calibration and the
//! reproduction pipeline.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fragility::compose;
use crate::hazard::{calibrate_power_law, fit_log_rates, two_in_fifty_rate, Constraint, CurveFamily, HazardModel};
use crate::probcore::{lognormal_cdf, LognormalSpec};
use crate::riskengine::{assess_with_profile, QuadratureSettings, RateProfile, RiskReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Goulet,
    Liel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameCase {
    pub case_id: u8,
    pub source: Source,
    pub stories: u32,
    /// Fundamental period in seconds.
    pub period_t1: f64,
    /// Median capacity over the 2%-in-50-years intensity.
    pub margin: f64,
    pub x: LognormalSpec,
    pub z: LognormalSpec,
    pub y: LognormalSpec,
}

const fn ln(median: f64, dispersion: f64) -> LognormalSpec {
    LognormalSpec { median, dispersion }
}

const fn frame(
    case_id: u8,
    x: LognormalSpec,
    z: LognormalSpec,
    y: LognormalSpec,
    margin: f64,
    period_t1: f64,
    stories: u32,
    source: Source,
) -> FrameCase {
    FrameCase { case_id, source, stories, period_t1, margin, x, z, y }
}

const CASES: [FrameCase; 7] = [
    frame(1, ln(1.7, 0.30), ln(1.7, 0.58), ln(1.0, 0.5), 2.11, 1.00, 4, Source::Goulet),
    frame(2, ln(2.1, 0.29), ln(2.1, 0.578), ln(1.0, 0.5), 2.61, 1.00, 4, Source::Goulet),
    frame(3, ln(2.8, 0.34), ln(2.8, 0.605), ln(1.0, 0.5), 3.48, 1.00, 4, Source::Goulet),
    frame(4, ln(1.3, 0.40), ln(1.10, 0.48), ln(0.85, 0.26533), 1.52, 1.12, 4, Source::Liel),
    frame(5, ln(0.61, 0.473), ln(0.56, 0.52), ln(0.918, 0.21603), 1.23, 2.01, 12, Source::Liel),
    frame(6, ln(0.3, 0.45), ln(0.28, 0.50), ln(0.933, 0.21795), 0.63, 1.98, 12, Source::Liel),
    frame(7, ln(0.35, 0.415), ln(0.38, 0.49), ln(1.086, 0.26053), 0.73, 2.26, 12, Source::Liel),
];

/// Annual rates ×1e4: rtr only, exact, ensemble, ratio, percent error.
const RATES: [[f64; 5]; 7] = [
    [0.215, 2.564, 2.569, 11.92, 0.17],
    [0.049, 1.087, 1.088, 22.20, 0.11],
    [0.013, 0.422, 0.422, 31.55, 0.07],
    [2.413, 6.743, 6.746, 2.80, 0.04],
    [6.790, 11.086, 11.089, 1.63, 0.03],
    [51.168, 67.903, 67.969, 1.33, 0.10],
    [30.937, 30.565, 30.592, 0.99, 0.09],
];

/// Fifty-year probabilities: a, b, c, ratio, percent error, error
/// parameter, variance product.
const FIFTY: [[f64; 7]; 7] = [
    [0.0011, 0.0119, 0.0128, 11.03, 7.62, 0.54, 0.07],
    [0.0002, 0.0052, 0.0054, 21.05, 5.27, 0.44, 0.02],
    [0.0001, 0.0020, 0.0021, 30.60, 3.05, 0.31, 0.01],
    [0.0120, 0.0326, 0.0332, 2.72, 1.79, 0.38, 0.05],
    [0.0334, 0.0532, 0.0539, 1.59, 1.40, 0.46, 0.07],
    [0.2257, 0.2772, 0.2881, 1.23, 3.94, 0.88, 0.70],
    [0.1433, 0.1363, 0.1418, 0.95, 4.07, 0.79, 0.42],
];

const HUNDRED: [[f64; 7]; 7] = [
    [0.0021, 0.0222, 0.0254, 10.34, 14.16, 0.54, 0.40],
    [0.0005, 0.0098, 0.0108, 20.11, 9.91, 0.44, 0.14],
    [0.0001, 0.0040, 0.0042, 29.77, 5.83, 0.31, 0.04],
    [0.0238, 0.0631, 0.0652, 2.64, 3.46, 0.38, 0.36],
    [0.0656, 0.1022, 0.1050, 1.56, 2.69, 0.46, 0.45],
    [0.4005, 0.4635, 0.4932, 1.16, 6.40, 0.88, 2.67],
    [0.2661, 0.2456, 0.2636, 0.92, 7.33, 0.79, 2.19],
];

const GROUPS: [&[u8]; 3] = [&[1, 2, 3], &[4], &[5, 6, 7]];

pub fn builtin_cases() -> Vec<FrameCase> {
    CASES.to_vec()
}

pub fn frame_case(case_id: u8) -> Result<FrameCase> {
    CASES
        .iter()
        .find(|c| c.case_id == case_id)
        .copied()
        .ok_or_else(|| Error::Config(format!("unknown case {case_id} (expected 1 to 7)")))
}

/// Cases that share one site hazard curve.
pub fn hazard_group(case_id: u8) -> Result<&'static [u8]> {
    GROUPS
        .iter()
        .find(|g| g.contains(&case_id))
        .copied()
        .ok_or_else(|| Error::Config(format!("unknown case {case_id} (expected 1 to 7)")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// Columns a–c are annual rates in 1/year.
    AnnualRate,
    /// Columns a–c are probabilities over `t_d`.
    Probability,
}

/// Published reference row. Columns: `a` with record-to-record variability
/// only, `b` exact, `c` ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PublishedRow {
    pub kind: RowKind,
    pub t_d: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub ratio: f64,
    pub err_pct: f64,
    pub error_parameter: Option<f64>,
    pub var_product: Option<f64>,
}

pub fn published_targets(case_id: u8, t_d: f64) -> Option<PublishedRow> {
    let i = CASES.iter().position(|c| c.case_id == case_id)?;
    if t_d == 1.0 {
        let r = RATES[i];
        return Some(PublishedRow {
            kind: RowKind::AnnualRate,
            t_d,
            a: r[0] * 1e-4,
            b: r[1] * 1e-4,
            c: r[2] * 1e-4,
            ratio: r[3],
            err_pct: r[4],
            error_parameter: None,
            var_product: None,
        });
    }
    let r = if t_d == 50.0 {
        FIFTY[i]
    } else if t_d == 100.0 {
        HUNDRED[i]
    } else {
        return None;
    };
    Some(PublishedRow {
        kind: RowKind::Probability,
        t_d,
        a: r[0],
        b: r[1],
        c: r[2],
        ratio: r[3],
        err_pct: r[4],
        error_parameter: Some(r[5]),
        var_product: Some(r[6]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationStrategy {
    /// Power law through the rtr-only and ensemble annual rates.
    #[default]
    TwoRate,
    /// Power law through the margin-implied 2%-in-50-years intensity and the
    /// rtr-only annual rate.
    AnchorSlope,
    /// One log-quadratic curve fitted to both rates of every case in the
    /// hazard group.
    GroupCurved,
}

impl FromStr for CalibrationStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_rate" => Ok(Self::TwoRate),
            "anchor_slope" => Ok(Self::AnchorSlope),
            "group_curved" => Ok(Self::GroupCurved),
            _ => Err(Error::Config(format!(
                "unknown strategy `{s}` (expected two_rate, anchor_slope or group_curved)"
            ))),
        }
    }
}

impl fmt::Display for CalibrationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TwoRate => "two_rate",
            Self::AnchorSlope => "anchor_slope",
            Self::GroupCurved => "group_curved",
        })
    }
}

/// Intensity with a 2% chance of exceedance in 50 years implied by the margin.
pub fn anchor_intensity(case: &FrameCase) -> f64 {
    case.x.median / case.margin
}

/// Relative spread in percent, `(max − min)/min`, of the anchors in a group.
pub fn anchor_spread(case_id: u8) -> Result<f64> {
    let anchors = hazard_group(case_id)?
        .iter()
        .map(|&id| frame_case(id).map(|c| anchor_intensity(&c)))
        .collect::<Result<Vec<f64>>>()?;
    let lo = anchors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = anchors.iter().copied().fold(0.0, f64::max);
    Ok(100.0 * (hi - lo) / lo)
}

fn rate_targets(case: &FrameCase) -> Result<[(LognormalSpec, f64); 2]> {
    let row = published_targets(case.case_id, 1.0)
        .ok_or_else(|| Error::Config(format!("no reference rates for case {}", case.case_id)))?;
    Ok([(case.x, row.a), (compose(&case.x, &case.y), row.c)])
}

pub fn calibrate_case(case: &FrameCase, strategy: CalibrationStrategy, q: &QuadratureSettings) -> Result<HazardModel> {
    match strategy {
        CalibrationStrategy::TwoRate => {
            let [(x, a), (z, c)] = rate_targets(case)?;
            let cons = [
                Constraint::AnnualRate { capacity: x, rate: a },
                Constraint::AnnualRate { capacity: z, rate: c },
            ];
            Ok(HazardModel::PowerLaw(calibrate_power_law(&cons, q)?))
        }
        CalibrationStrategy::AnchorSlope => {
            let spread = anchor_spread(case.case_id)?;
            if spread > 2.0 {
                return Err(Error::AnchorInconsistent { spread });
            }
            let [(x, a), _] = rate_targets(case)?;
            let cons = [
                Constraint::Exceedance { im: anchor_intensity(case), rate: two_in_fifty_rate() },
                Constraint::AnnualRate { capacity: x, rate: a },
            ];
            Ok(HazardModel::PowerLaw(calibrate_power_law(&cons, q)?))
        }
        CalibrationStrategy::GroupCurved => {
            let group = hazard_group(case.case_id)?;
            if group.len() == 1 {
                return calibrate_case(case, CalibrationStrategy::TwoRate, q);
            }
            let mut targets = Vec::new();
            for &id in group {
                targets.extend(rate_targets(&frame_case(id)?)?);
            }
            fit_log_rates(&targets, CurveFamily::LogQuadratic, q)
        }
    }
}

/// Signed differences against the reference row, `ours − reference`, with
/// the rates or probabilities matched to the row kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deltas {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub ratio: f64,
    pub err_pct: f64,
    pub error_parameter: Option<f64>,
    pub var_product: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub case_id: u8,
    pub strategy: CalibrationStrategy,
    pub hazard_used: HazardModel,
    pub report: RiskReport,
    pub published: Option<PublishedRow>,
}

impl CaseResult {
    /// Computed values laid out like the reference row: `[a, b, c, ratio, err]`.
    pub fn columns(&self) -> [f64; 5] {
        let r = &self.report;
        match self.published.map(|p| p.kind) {
            Some(RowKind::AnnualRate) => [r.lambda_rtr, r.lambda_exact, r.lambda_ensemble, r.ratio_lambda, r.err_pct_lambda],
            _ => [r.pf_rtr, r.pf_exact, r.pf_ensemble, r.ratio_pf, r.err_pct_pf],
        }
    }

    pub fn deltas(&self) -> Option<Deltas> {
        let p = self.published?;
        let [a, b, c, ratio, err] = self.columns();
        let minus = |ours: Option<f64>, theirs: Option<f64>| Some(ours? - theirs?);
        Some(Deltas {
            a: a - p.a,
            b: b - p.b,
            c: c - p.c,
            ratio: ratio - p.ratio,
            err_pct: err - p.err_pct,
            error_parameter: minus(self.report.error_parameter, p.error_parameter),
            var_product: p.var_product.map(|v| self.report.var_product - v),
        })
    }
}

/// Calibrates the hazard once and assesses the case at every exposure time.
pub fn reproduce(
    case: &FrameCase,
    times: &[f64],
    strategy: CalibrationStrategy,
    q: &QuadratureSettings,
) -> Result<Vec<CaseResult>> {
    let hazard = calibrate_case(case, strategy, q)?;
    let profile = RateProfile::new(&case.x, &case.y, &hazard, q)?;
    times
        .iter()
        .map(|&t| {
            let report = assess_with_profile(&profile, &case.x, &case.y, &hazard, Some(case.margin), t, q)?;
            Ok(CaseResult {
                case_id: case.case_id,
                strategy,
                hazard_used: hazard.clone(),
                report,
                published: published_targets(case.case_id, t),
            })
        })
        .collect()
}

/// [`reproduce`] over several cases, in the order given.
pub fn reproduce_all(
    cases: &[FrameCase],
    times: &[f64],
    strategy: CalibrationStrategy,
    q: &QuadratureSettings,
) -> Result<Vec<CaseResult>> {
    let per_case = cases
        .par_iter()
        .map(|c| reproduce(c, times, strategy, q))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_case.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FragilityRow {
    pub im: f64,
    pub f_x: f64,
    pub f_z_reported: f64,
    pub f_z_composed: f64,
}

pub fn fragility_profiles(case: &FrameCase, grid: &[f64]) -> Result<Vec<FragilityRow>> {
    let composed = compose(&case.x, &case.y);
    grid.iter()
        .map(|&im| {
            Ok(FragilityRow {
                im,
                f_x: lognormal_cdf(&case.x, im)?,
                f_z_reported: lognormal_cdf(&case.z, im)?,
                f_z_composed: lognormal_cdf(&composed, im)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragility::decompose;
    use crate::hazard::PowerLaw;
    use crate::riskengine::annual_rate;

    fn q() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn table_rows_verbatim() {
        let c4 = frame_case(4).unwrap();
        assert_eq!((c4.x, c4.z, c4.y), (ln(1.3, 0.40), ln(1.10, 0.48), ln(0.85, 0.26533)));
        let c2 = frame_case(2).unwrap();
        assert_eq!((c2.z, c2.y), (ln(2.1, 0.578), ln(1.0, 0.5)));
        let c6 = frame_case(6).unwrap();
        assert_eq!((c6.x, c6.z, c6.y, c6.margin), (ln(0.3, 0.45), ln(0.28, 0.50), ln(0.933, 0.21795), 0.63));
        assert!(frame_case(8).is_err());
        assert_eq!(builtin_cases().len(), 7);
    }

    #[test]
    fn composition_is_consistent() {
        for c in builtin_cases() {
            let z = compose(&c.x, &c.y);
            assert!((z.median - c.z.median).abs() <= 0.01, "case {}", c.case_id);
            assert!((z.dispersion - c.z.dispersion).abs() <= 0.005, "case {}", c.case_id);
        }
        let y3 = decompose(&frame_case(3).unwrap().z, &frame_case(3).unwrap().x).unwrap();
        assert!((y3.median - 1.0).abs() < 1e-12);
        assert!((y3.dispersion - (0.605f64.powi(2) - 0.34f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((y3.dispersion - 0.5).abs() < 0.005);
    }

    #[test]
    fn groups_and_targets() {
        assert_eq!(hazard_group(2).unwrap(), &[1, 2, 3]);
        assert_eq!(hazard_group(4).unwrap(), &[4]);
        let t = published_targets(5, 1.0).unwrap();
        assert!((t.a / 6.790e-4 - 1.0).abs() < 1e-12 && (t.c / 11.089e-4 - 1.0).abs() < 1e-12);
        assert_eq!(published_targets(7, 100.0).unwrap().err_pct, 7.33);
        assert!(published_targets(1, 10.0).is_none());
    }

    #[test]
    fn two_rate_hits_both_targets() {
        for id in [1, 5] {
            let case = frame_case(id).unwrap();
            let h = calibrate_case(&case, CalibrationStrategy::TwoRate, &q()).unwrap();
            let row = published_targets(id, 1.0).unwrap();
            let a = annual_rate(&case.x, &h, &q()).unwrap();
            let c = annual_rate(&compose(&case.x, &case.y), &h, &q()).unwrap();
            assert!((a / row.a - 1.0).abs() < 1e-6);
            assert!((c / row.c - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn anchors_agree_only_in_first_group() {
        assert!(anchor_spread(1).unwrap() < 0.2);
        assert!(anchor_spread(6).unwrap() > 2.0);
        let case = frame_case(2).unwrap();
        let HazardModel::PowerLaw(p) = calibrate_case(&case, CalibrationStrategy::AnchorSlope, &q()).unwrap() else {
            panic!("expected a power law");
        };
        let h = HazardModel::PowerLaw(p);
        let at_anchor = h.exceedance(anchor_intensity(&case)).unwrap();
        assert!((at_anchor / two_in_fifty_rate() - 1.0).abs() < 1e-6);
        let err = calibrate_case(&frame_case(6).unwrap(), CalibrationStrategy::AnchorSlope, &q()).unwrap_err();
        assert!(matches!(err, Error::AnchorInconsistent { .. }));
    }

    #[test]
    fn synthetic_case_round_trip() {
        let truth = PowerLaw::new(4e-5 * 0.8f64.powf(2.4), 2.4).unwrap();
        let h = HazardModel::PowerLaw(truth);
        let x = ln(1.1, 0.35);
        let y = ln(0.9, 0.3);
        let cons = [
            Constraint::AnnualRate { capacity: x, rate: annual_rate(&x, &h, &q()).unwrap() },
            Constraint::AnnualRate { capacity: compose(&x, &y), rate: annual_rate(&compose(&x, &y), &h, &q()).unwrap() },
        ];
        let got = calibrate_power_law(&cons, &q()).unwrap();
        assert!((got.k / truth.k - 1.0).abs() < 1e-6);
        assert!((got.k0 / truth.k0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn group_curved_falls_back_for_singletons() {
        let case = frame_case(4).unwrap();
        assert_eq!(
            calibrate_case(&case, CalibrationStrategy::GroupCurved, &q()).unwrap(),
            calibrate_case(&case, CalibrationStrategy::TwoRate, &q()).unwrap()
        );
    }

    #[test]
    fn fragility_profiles_coincide() {
        let grid: Vec<f64> = (1..=300).map(|i| i as f64 * 0.02).collect();
        for id in [2, 4] {
            let rows = fragility_profiles(&frame_case(id).unwrap(), &grid).unwrap();
            let worst = rows.iter().map(|r| (r.f_z_composed - r.f_z_reported).abs()).fold(0.0, f64::max);
            assert!(worst <= 0.01, "case {id}: {worst}");
        }
        let tiny = fragility_profiles(&frame_case(1).unwrap(), &[1e-6]).unwrap()[0];
        assert!(tiny.f_x < 1e-12 && tiny.f_z_reported < 1e-12 && tiny.f_z_composed < 1e-12);
    }

    #[test]
    fn strategy_names() {
        for s in [CalibrationStrategy::TwoRate, CalibrationStrategy::AnchorSlope, CalibrationStrategy::GroupCurved] {
            assert_eq!(s.to_string().parse::<CalibrationStrategy>().unwrap(), s);
        }
    }
}
