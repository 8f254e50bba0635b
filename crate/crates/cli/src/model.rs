//! Model files: a fragility, a hazard and analysis settings in JSON.
//!
//! ```json
//! {
//!   "fragility": { "x": {"median": 1.7, "dispersion": 0.3}, "y": {"median": 1.0, "dispersion": 0.5} },
//!   "hazard": { "power_law": {"k0": 1e-5, "k": 3.0} },
//!   "analysis": { "t_D": [1, 50, 100], "margin": 2.11 }
//! }
//! ```
//!
//! The fragility may give `z` and `x` instead of `x` and `y`. The hazard is
//! one of `pulse`, `power_law`, `log_quadratic` or `table`; a table is a CSV
//! path (relative to the model file) or `{"path": …, "extrapolate": true}`.

use std::fs;
use std::path::{Path, PathBuf};

use ergorisk_core::fragility::decompose;
use ergorisk_core::hazard::{HazardModel, HazardTable, LogQuadratic, PowerLaw};
use ergorisk_core::probcore::LognormalSpec;
use ergorisk_core::riskengine::QuadratureSettings;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    fragility: RawFragility,
    hazard: RawHazard,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFragility {
    x: LognormalSpec,
    y: Option<LognormalSpec>,
    z: Option<LognormalSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawHazard {
    Pulse { eta: f64, median: f64, dispersion: f64 },
    PowerLaw { k0: f64, k: f64, im_min: Option<f64> },
    LogQuadratic { a0: f64, a1: f64, a2: f64 },
    Table(TableRef),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TableRef {
    Path(PathBuf),
    Full {
        path: PathBuf,
        #[serde(default)]
        extrapolate: bool,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(rename = "t_D", default)]
    t_d: Vec<f64>,
    #[serde(default)]
    quadrature: QuadratureSettings,
    margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub x: LognormalSpec,
    pub y: LognormalSpec,
    pub hazard: HazardModel,
    pub t_d: Vec<f64>,
    pub quadrature: QuadratureSettings,
    pub margin: Option<f64>,
}

pub fn load(path: &Path) -> Result<Model, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let raw: RawModel = serde_path_to_error::deserialize(de)
        .map_err(|e| CliError::input(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    build(raw, base).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn build(raw: RawModel, base: &Path) -> Result<Model, String> {
    let f = raw.fragility;
    let x = checked("fragility.x", f.x)?;
    let y = match (f.y, f.z) {
        (Some(y), None) => checked("fragility.y", y)?,
        (None, Some(z)) => decompose(&checked("fragility.z", z)?, &x).map_err(|e| format!("at `fragility`: {e}"))?,
        (Some(_), Some(_)) => return Err("at `fragility`: give either `y` or `z`, not both".into()),
        (None, None) => return Err("at `fragility`: missing `y` (or `z`)".into()),
    };
    let hazard = match raw.hazard {
        RawHazard::Pulse { eta, median, dispersion } => LognormalSpec::new(median, dispersion)
            .and_then(|s| HazardModel::pulse(eta, s)),
        RawHazard::PowerLaw { k0, k, im_min } => match im_min {
            Some(m) => PowerLaw::with_im_min(k0, k, m),
            None => PowerLaw::new(k0, k),
        }
        .map(HazardModel::PowerLaw),
        RawHazard::LogQuadratic { a0, a1, a2 } => LogQuadratic::new(a0, a1, a2).map(HazardModel::LogQuadratic),
        RawHazard::Table(t) => {
            let (p, extrapolate) = match t {
                TableRef::Path(p) => (p, false),
                TableRef::Full { path, extrapolate } => (path, extrapolate),
            };
            let p = if p.is_absolute() { p } else { base.join(p) };
            HazardTable::from_csv_path(&p, extrapolate)
                .map(HazardModel::Tabulated)
                .map_err(|e| ergorisk_core::Error::Config(format!("{}: {e}", p.display())))
        }
    }
    .map_err(|e| format!("at `hazard`: {e}"))?;
    let a = raw.analysis;
    a.quadrature.validate().map_err(|e| format!("at `analysis.quadrature`: {e}"))?;
    if let Some(t) = a.t_d.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(format!("at `analysis.t_D`: exposure times must be positive, got {t}"));
    }
    if let Some(m) = a.margin.filter(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(format!("at `analysis.margin`: margin must be positive, got {m}"));
    }
    Ok(Model { x, y, hazard, t_d: a.t_d, quadrature: a.quadrature, margin: a.margin })
}

fn checked(at: &str, spec: LognormalSpec) -> Result<LognormalSpec, String> {
    spec.validate().map(|_| spec).map_err(|e| format!("at `{at}`: {e}"))
}
