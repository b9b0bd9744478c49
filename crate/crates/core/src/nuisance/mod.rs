//! Conditional survival estimators for `T | X` and `C | X`.

mod cox;
mod km;
mod knn;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::survival::{ObservedRecord, StepSurvivalCurve};

pub use cox::{cox_fit, cox_fit_traced, partial_log_likelihood, CoxModel, NewtonConfig};
pub use km::{km_fit, product_limit, KaplanMeier};
pub use knn::{default_knn_k, knn_km_fit, KnnKaplanMeier};

/// A fitted model mapping covariates to a survival curve.
pub trait ConditionalSurvivalModel: Send + Sync + Debug {
    fn predict_curve(&self, x: &[f64]) -> StepSurvivalCurve;
}

impl<M: ConditionalSurvivalModel + ?Sized> ConditionalSurvivalModel for std::sync::Arc<M> {
    fn predict_curve(&self, x: &[f64]) -> StepSurvivalCurve {
        (**self).predict_curve(x)
    }
}

/// Pointwise conditional survival `S(t | x)`. Every fitted model provides it
/// through its predicted curve; closed-form laws implement it directly.
pub trait PointSurvival: Send + Sync {
    fn survival_at(&self, x: &[f64], t: f64) -> f64;

    /// `S(t_k | x)` for ascending `times`.
    fn survival_at_sorted(&self, x: &[f64], times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.survival_at(x, t)).collect()
    }
}

impl<M: ConditionalSurvivalModel + ?Sized> PointSurvival for M {
    fn survival_at(&self, x: &[f64], t: f64) -> f64 {
        self.predict_curve(x).evaluate(t)
    }

    fn survival_at_sorted(&self, x: &[f64], times: &[f64]) -> Vec<f64> {
        self.predict_curve(x).evaluate_sorted(times)
    }
}

/// Which latent time a model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetKind {
    /// Fits on `(Y, Delta)`.
    EventTime,
    /// Fits on `(Y, 1 - Delta)`.
    CensoringTime,
}

impl TargetKind {
    #[inline]
    pub fn indicator(self, record: &ObservedRecord) -> bool {
        match self {
            TargetKind::EventTime => record.event,
            TargetKind::CensoringTime => !record.event,
        }
    }
}
