//! Seismic risk with ergodic and non-ergodic capacity uncertainty.
//!
//! Capacity in intensity units is split as `Z = X · Y`: `X` is renewed at
//! every event and `Y` is fixed for the life of a structure. The crate
//! integrates exact lifetime failure probabilities over `Y`, compares them
//! with the ensemble-rate shortcut `1 − exp(−λ_E t)`, and ships the toy
//! problem, a Monte Carlo oracle and a catalogue of reference cases.

pub mod casebook;
pub mod error;
pub mod fragility;
pub mod hazard;
pub mod probcore;
pub mod pulse_oracle;
pub mod quad;
pub mod riskengine;
pub mod solve;
pub mod toymodel;

pub use error::{Error, Result};
