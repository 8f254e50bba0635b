use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Total capacity dispersion smaller than its record-to-record part.
    #[error("dispersion deficit: total dispersion {total} is below ergodic dispersion {ergodic}")]
    DispersionDeficit { total: f64, ergodic: f64 },

    #[error("{integral} did not converge (relative residual {residual:.3e})")]
    NonConvergence { integral: &'static str, residual: f64 },

    #[error("calibration failed: {reason} (best residual {residual:.3e})")]
    Calibration { reason: String, residual: f64 },

    #[error("intensity {im} g is outside the tabulated hazard range [{lo}, {hi}]")]
    OutOfTable { im: f64, lo: f64, hi: f64 },

    #[error("hazard table row {row}: {reason}")]
    Table { row: usize, reason: String },

    #[error("margin-implied anchors disagree by {spread:.2}% across the hazard group")]
    AnchorInconsistent { spread: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
