//! Per-record influence function of the calibration moment, in the
//! projection form and in the rearranged form.

use crate::conformity::{EtaFunction, NonConformityScore};
use crate::survival::{clamp_survival, ObservedRecord, StepSurvivalCurve};

use super::martingale_increments;

/// The ingredients both forms share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfComponents {
    pub event: bool,
    /// `1{R(X, Y) >= beta}`.
    pub covers: bool,
    /// `1 / S_C(Y | X)`.
    pub inverse_weight: f64,
    /// `A = int dM_C / S_C`.
    pub martingale_mass: f64,
    /// `B = int eta dM_C / S_C`.
    pub eta_mass: f64,
}

impl IfComponents {
    /// `Delta (1{R >= beta} - c) / S_C(Y) + int (eta - c) dM_C / S_C`, `c = 1 - alpha`.
    pub fn eq_form(&self, alpha: f64) -> f64 {
        let c = 1.0 - alpha;
        let ind = if self.covers { 1.0 } else { 0.0 };
        let ipcw = if self.event {
            (ind - c) * self.inverse_weight
        } else {
            0.0
        };
        ipcw + self.eta_mass - c * self.martingale_mass
    }

    /// `1{R(X, T) >= beta} - c - int (1{R(X, T) >= beta} - eta) dM_C / S_C`.
    /// `covers_full` is the indicator at the latent event time.
    pub fn lemma_form(&self, alpha: f64, covers_full: bool) -> f64 {
        let c = 1.0 - alpha;
        let ind = if covers_full { 1.0 } else { 0.0 };
        ind - c - (ind * self.martingale_mass - self.eta_mass)
    }
}

/// Components for a fitted step censoring curve, with the martingale
/// integral taken as a finite sum over `censor_times`.
pub fn influence_components(
    record: &ObservedRecord,
    score: &dyn NonConformityScore,
    eta: &dyn EtaFunction,
    censor_curve: &StepSurvivalCurve,
    censor_times: &[f64],
    beta: f64,
    floor: f64,
) -> IfComponents {
    let inc = martingale_increments(record, censor_curve, censor_times, floor);
    let sc = censor_curve.evaluate_sorted(censor_times);
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    for ((&d, &s), &u) in inc.iter().zip(&sc).zip(censor_times) {
        if d == 0.0 {
            continue;
        }
        let a = d / clamp_survival(s, floor);
        a_sum += a;
        b_sum += a * eta.eta(beta, u, &record.covariates);
    }
    IfComponents {
        event: record.event,
        covers: score.score(&record.covariates, record.time) >= beta,
        inverse_weight: 1.0 / clamp_survival(censor_curve.evaluate(record.time), floor),
        martingale_mass: a_sum,
        eta_mass: b_sum,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn influence_function(
    record: &ObservedRecord,
    score: &dyn NonConformityScore,
    eta: &dyn EtaFunction,
    censor_curve: &StepSurvivalCurve,
    censor_times: &[f64],
    beta: f64,
    alpha: f64,
    floor: f64,
) -> f64 {
    influence_components(record, score, eta, censor_curve, censor_times, beta, floor).eq_form(alpha)
}

pub fn influence_function_lemma_form(components: &IfComponents, alpha: f64, covers_full: bool) -> f64 {
    components.lemma_form(alpha, covers_full)
}
