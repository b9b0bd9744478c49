//! Non-conformity scores and the conditional expectation `eta`.

mod eta;
mod score;

pub use eta::{EtaFunction, GenericEta, QuantileEta};
pub use score::{NonConformityScore, QuantileScore};
