use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HazardModel;
use crate::error::{Error, Result};

/// Hazard curve given at knots, interpolated linearly in `(ln im, ln H)`.
///
/// Queries beyond the first or last knot are rejected unless `extrapolate`
/// is set, in which case the terminal log-log slopes are extended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardTable {
    ims: Vec<f64>,
    rates: Vec<f64>,
    #[serde(default)]
    extrapolate: bool,
}

impl HazardTable {
    pub fn new(points: &[(f64, f64)], extrapolate: bool) -> Result<Self> {
        let table = Self {
            ims: points.iter().map(|p| p.0).collect(),
            rates: points.iter().map(|p| p.1).collect(),
            extrapolate,
        };
        table.validate()?;
        Ok(table)
    }

    /// Samples `model` at `n` log-spaced intensities in `[lo, hi]`.
    pub fn sample(model: &HazardModel, lo: f64, hi: f64, n: usize, extrapolate: bool) -> Result<Self> {
        if n < 2 || !(lo > 0.0 && hi > lo) {
            return Err(Error::domain("sampling needs n >= 2 and 0 < lo < hi"));
        }
        let step = (hi / lo).ln() / (n - 1) as f64;
        let points = (0..n)
            .map(|i| {
                let im = if i + 1 == n { hi } else { lo * (step * i as f64).exp() };
                model.exceedance(im).map(|h| (im, h))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&points, extrapolate)
    }

    /// Reads a CSV with header `im,H` (g, 1/year). Row numbers in errors are
    /// file line numbers.
    pub fn from_csv_reader<R: Read>(reader: R, extrapolate: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Table { row: 1, reason: e.to_string() })?;
        if headers.len() != 2 || &headers[0] != "im" || &headers[1] != "H" {
            return Err(Error::Table { row: 1, reason: format!("expected header \"im,H\", found {:?}", headers.iter().collect::<Vec<_>>().join(",")) });
        }
        let mut points = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Table {
                row: e.position().map_or(0, |p| p.line() as usize),
                reason: e.to_string(),
            })?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            let parse = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| Error::Table { row, reason: format!("column {}: {e}", i + 1) })
            };
            let (im, h) = (parse(0)?, parse(1)?);
            if !(im > 0.0 && im.is_finite()) || !(h > 0.0 && h.is_finite()) {
                return Err(Error::Table { row, reason: "intensity and rate must be positive".into() });
            }
            if let Some(&(pim, ph)) = points.last() {
                if im <= pim {
                    return Err(Error::Table { row, reason: format!("intensity {im} does not increase (previous {pim})") });
                }
                if h >= ph {
                    return Err(Error::Table { row, reason: format!("rate {h} does not decrease (previous {ph})") });
                }
            }
            points.push((im, h));
        }
        if points.len() < 2 {
            return Err(Error::Table { row: 0, reason: "need at least two rows".into() });
        }
        Self::new(&points, extrapolate)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, extrapolate: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Table { row: 0, reason: format!("{}: {e}", path.display()) })?;
        Self::from_csv_reader(file, extrapolate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ims.len() != self.rates.len() || self.ims.len() < 2 {
            return Err(Error::Table { row: 0, reason: "need at least two (im, H) points".into() });
        }
        for (i, (&im, &h)) in self.ims.iter().zip(&self.rates).enumerate() {
            if !(im > 0.0 && im.is_finite() && h > 0.0 && h.is_finite()) {
                return Err(Error::Table { row: i + 1, reason: "intensity and rate must be positive".into() });
            }
            if i > 0 && (im <= self.ims[i - 1] || h >= self.rates[i - 1]) {
                return Err(Error::Table { row: i + 1, reason: "im must increase and H must decrease strictly".into() });
            }
        }
        Ok(())
    }

    pub fn ims(&self) -> &[f64] {
        &self.ims
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn extrapolates(&self) -> bool {
        self.extrapolate
    }

    pub fn support(&self) -> (f64, f64) {
        if self.extrapolate {
            (0.0, f64::INFINITY)
        } else {
            (self.ims[0], self.ims[self.ims.len() - 1])
        }
    }

    /// Segment index `i` such that `im` is interpolated between knots `i`
    /// and `i + 1`.
    fn segment(&self, im: f64) -> Result<usize> {
        let n = self.ims.len();
        let (lo, hi) = (self.ims[0], self.ims[n - 1]);
        if !self.extrapolate && (im < lo || im > hi) {
            return Err(Error::OutOfTable { im, lo, hi });
        }
        let i = self.ims.partition_point(|&v| v <= im);
        Ok(i.saturating_sub(1).min(n - 2))
    }

    fn log_slope(&self, i: usize) -> f64 {
        (self.rates[i + 1] / self.rates[i]).ln() / (self.ims[i + 1] / self.ims[i]).ln()
    }

    pub fn exceedance(&self, im: f64) -> Result<f64> {
        let i = self.segment(im)?;
        if im == self.ims[i] {
            return Ok(self.rates[i]);
        }
        if im == self.ims[i + 1] {
            return Ok(self.rates[i + 1]);
        }
        Ok(self.rates[i] * (im / self.ims[i]).powf(self.log_slope(i)))
    }

    pub fn density(&self, im: f64) -> Result<f64> {
        let i = self.segment(im)?;
        Ok(-self.log_slope(i) * self.exceedance(im)? / im)
    }

    pub fn intensity_at_rate(&self, rate: f64) -> Option<f64> {
        let n = self.rates.len();
        // rates decrease, so search on the reversed order
        let j = self.rates.partition_point(|&h| h > rate);
        let i = if j == 0 {
            if !self.extrapolate {
                return None;
            }
            0
        } else if j >= n {
            if !self.extrapolate {
                return (self.rates[n - 1] == rate).then_some(self.ims[n - 1]);
            }
            n - 2
        } else {
            j - 1
        };
        Some(self.ims[i] * (rate / self.rates[i]).powf(1.0 / self.log_slope(i)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::PowerLaw;

    fn small() -> HazardTable {
        HazardTable::new(&[(0.1, 1e-1), (0.5, 2e-3), (1.0, 2e-4), (2.0, 1e-5)], false).unwrap()
    }

    #[test]
    fn knots_are_exact() {
        let t = small();
        for (im, h) in [(0.1, 1e-1), (0.5, 2e-3), (1.0, 2e-4), (2.0, 1e-5)] {
            assert_eq!(t.exceedance(im).unwrap(), h);
        }
    }

    #[test]
    fn extrapolation_is_opt_in() {
        let t = small();
        assert!(matches!(t.exceedance(3.0), Err(Error::OutOfTable { .. })));
        assert!(matches!(t.exceedance(0.05), Err(Error::OutOfTable { .. })));
        let t = HazardTable { extrapolate: true, ..small() };
        let s = t.log_slope(2);
        assert!((t.exceedance(4.0).unwrap() - 1e-5 * 2f64.powf(s)).abs() < 1e-18);
        assert!(t.exceedance(0.05).unwrap() > 1e-1);
    }

    #[test]
    fn power_law_roundtrip() {
        let law = HazardModel::PowerLaw(PowerLaw::new(3e-4, 2.7).unwrap());
        let t = HazardTable::sample(&law, 0.05, 5.0, 50, false).unwrap();
        let tab = HazardModel::Tabulated(t);
        for i in 0..200 {
            let im = 0.05 * (100f64).powf((i as f64 + 0.5) / 200.0);
            let (a, b) = (tab.exceedance(im).unwrap(), law.exceedance(im).unwrap());
            assert!(((a - b) / b).abs() < 1e-3, "im={im}");
        }
    }

    #[test]
    fn csv_parsing() {
        let t = HazardTable::from_csv_reader("im,H\n0.1,0.1\n0.5,0.002\n1.0,0.0002\n".as_bytes(), false).unwrap();
        assert_eq!(t.ims(), &[0.1, 0.5, 1.0]);

        let err = HazardTable::from_csv_reader("im,H\n0.1,0.1\n0.5,0.2\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Table { row: 3, .. }), "{err:?}");

        let err = HazardTable::from_csv_reader("im,H\n0.1,0.1\n0.05,0.01\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Table { row: 3, .. }), "{err:?}");

        let err = HazardTable::from_csv_reader("x,y\n0.1,0.1\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Table { row: 1, .. }));

        let err = HazardTable::from_csv_reader("im,H\n0.1,0.1\n0.2,abc\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::Table { row: 3, .. }), "{err:?}");
    }

    #[test]
    fn density_is_log_log_slope() {
        let t = small();
        let im = 0.7;
        let s = t.log_slope(1);
        assert!((im * t.density(im).unwrap() / t.exceedance(im).unwrap() + s).abs() < 1e-12);
    }

    #[test]
    fn inverse_lookup() {
        let t = small();
        let im = t.intensity_at_rate(1e-3).unwrap();
        assert!((t.exceedance(im).unwrap() - 1e-3).abs() < 1e-15);
        assert!(t.intensity_at_rate(1.0).is_none());
    }
}
