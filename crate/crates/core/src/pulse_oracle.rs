//! Brute-force Monte Carlo of the toy pulse process.
//!
//! Each structure draws its own `Y` (once, or afresh per pulse in the
//! ergodic mode), a Poisson number of pulses over the exposure time, and
//! fails if any pulse satisfies `x·y/s − 1 ≤ 0`. Structure `i` always uses
//! ChaCha8 stream `i` under a key derived from the seed, so results do not
//! depend on how the work is split across threads.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toymodel::{limit_state, ToyProblem};

/// Upper bound on the mean pulse count `η·t`.
const MAX_MEAN_PULSES: f64 = 500.0;
const CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YMode {
    /// `Y` drawn once per structure.
    #[default]
    NonErgodic,
    /// `Y` redrawn at every pulse.
    Ergodic,
}

impl FromStr for YMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non_ergodic" | "non-ergodic" => Ok(Self::NonErgodic),
            "ergodic" => Ok(Self::Ergodic),
            _ => Err(Error::Config(format!("unknown y mode `{s}` (expected non_ergodic or ergodic)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSimConfig {
    pub problem: ToyProblem,
    pub t_d: f64,
    pub n_structures: u64,
    pub seed: u64,
    pub y_mode: YMode,
}

impl PulseSimConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.n_structures == 0 {
            return Err(Error::Config("n_structures must be at least 1".into()));
        }
        if !(self.t_d > 0.0 && self.t_d.is_finite()) {
            return Err(Error::Config(format!("exposure time must be positive, got {}", self.t_d)));
        }
        if self.problem.eta * self.t_d > MAX_MEAN_PULSES {
            return Err(Error::Config(format!(
                "mean pulse count η·t = {} exceeds {MAX_MEAN_PULSES}",
                self.problem.eta * self.t_d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEstimate {
    pub pf_hat: f64,
    /// Binomial standard error `√(p̂(1 − p̂)/n)`.
    pub std_error: f64,
    pub n: u64,
}

impl SimEstimate {
    fn from_counts(failures: u64, n: u64) -> Self {
        let pf_hat = failures as f64 / n as f64;
        Self { pf_hat, std_error: (pf_hat * (1.0 - pf_hat) / n as f64).sqrt(), n }
    }
}

/// Poisson draw by sequential inversion.
fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean == 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn structure_fails(cfg: &PulseSimConfig, rng: &mut ChaCha8Rng) -> bool {
    let p = &cfg.problem;
    let fixed_y = match cfg.y_mode {
        YMode::NonErgodic => Some(p.y.at_std(normal(rng))),
        YMode::Ergodic => None,
    };
    let pulses = poisson(rng, p.eta * cfg.t_d);
    (0..pulses).any(|_| {
        let s = p.s.at_std(normal(rng));
        let x = p.x.at_std(normal(rng));
        let y = fixed_y.unwrap_or_else(|| p.y.at_std(normal(rng)));
        limit_state(s, x, y) <= 0.0
    })
}

fn simulate_chunked(cfg: &PulseSimConfig, chunk: u64) -> Result<SimEstimate> {
    cfg.validate()?;
    let key = ChaCha8Rng::seed_from_u64(cfg.seed).get_seed();
    let n = cfg.n_structures;
    let chunk = chunk.max(1);
    let failures: u64 = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::from_seed(key);
            (c * chunk..((c + 1) * chunk).min(n))
                .filter(|&i| {
                    rng.set_stream(i);
                    rng.set_word_pos(0);
                    structure_fails(cfg, &mut rng)
                })
                .count() as u64
        })
        .sum();
    Ok(SimEstimate::from_counts(failures, n))
}

/// Fraction of simulated structures that fail within `t_d`.
pub fn simulate(config: &PulseSimConfig) -> Result<SimEstimate> {
    simulate_chunked(config, CHUNK)
}

/// One-year failure probability, an estimate of the annual rate when the
/// rate is small. Below about 1e−5 per year the sampling error dominates at
/// practical sample sizes and the estimate is only indicative.
pub fn simulate_rate(config: &PulseSimConfig) -> Result<SimEstimate> {
    simulate(&PulseSimConfig { t_d: 1.0, ..*config })
}
