//! Conformal lower predictive bounds for right-censored survival times.
//!
//! The library fits conditional survival models for the event and censoring
//! times, turns the event model into a score, and calibrates a threshold on
//! held-out data so that `P(T >= L(X)) >= 1 - alpha`.

pub mod baselines;
pub mod calibrate;
pub mod conformity;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod nuisance;
pub mod survival;

pub use error::{Error, Result};
