use std::sync::Arc;

use super::NonConformityScore;
use crate::nuisance::ConditionalSurvivalModel;
use crate::survival::{clamp_survival, StepSurvivalCurve};

/// `eta(beta, u | x) = P(R(x, T) >= beta | X = x, T >= u)`.
pub trait EtaFunction: Send + Sync {
    fn eta(&self, beta: f64, u: f64, x: &[f64]) -> f64;

    /// For every level in `betas`, `sum_k weights[k] * eta(beta, times[k], x)`.
    /// `times` and `betas` are ascending.
    fn weighted_profile(&self, x: &[f64], times: &[f64], weights: &[f64], betas: &[f64]) -> Vec<f64> {
        betas
            .iter()
            .map(|&b| {
                times
                    .iter()
                    .zip(weights)
                    .map(|(&u, &w)| w * self.eta(b, u, x))
                    .sum()
            })
            .collect()
    }
}

/// `S(max(q(beta | x), u) | x) / S(u | x)` for the pseudo-quantile score.
#[derive(Debug, Clone)]
pub struct QuantileEta {
    model: Arc<dyn ConditionalSurvivalModel>,
    floor: f64,
}

impl QuantileEta {
    pub fn new(model: Arc<dyn ConditionalSurvivalModel>, floor: f64) -> Self {
        Self { model, floor }
    }

    pub fn eta_on_curve(curve: &StepSurvivalCurve, beta: f64, u: f64, floor: f64) -> f64 {
        let q = curve.quantile_unchecked(beta);
        if q <= u {
            return 1.0;
        }
        let num = if q.is_finite() {
            curve.evaluate(q)
        } else {
            curve.tail_value()
        };
        num / clamp_survival(curve.evaluate(u), floor)
    }
}

impl EtaFunction for QuantileEta {
    fn eta(&self, beta: f64, u: f64, x: &[f64]) -> f64 {
        Self::eta_on_curve(&self.model.predict_curve(x), beta, u, self.floor)
    }

    // With j = #{u_k < q}: terms k >= j have eta = 1 and terms k < j have
    // eta = S(q) / S(u_k), so each level costs O(1) after prefix sums.
    fn weighted_profile(&self, x: &[f64], times: &[f64], weights: &[f64], betas: &[f64]) -> Vec<f64> {
        let curve = self.model.predict_curve(x);
        let su = curve.evaluate_sorted(times);
        let mut p1 = Vec::with_capacity(times.len() + 1);
        let mut p2 = Vec::with_capacity(times.len() + 1);
        p1.push(0.0);
        p2.push(0.0);
        for (w, s) in weights.iter().zip(&su) {
            p1.push(p1.last().unwrap() + w);
            p2.push(p2.last().unwrap() + w / clamp_survival(*s, self.floor));
        }
        let total = p1[times.len()];
        let qs = curve.quantiles_sorted(betas);
        let mut j = 0;
        qs.iter()
            .map(|&q| {
                while j < times.len() && times[j] < q {
                    j += 1;
                }
                let sq = if q.is_finite() {
                    curve.evaluate(q)
                } else {
                    curve.tail_value()
                };
                (total - p1[j]) + sq * p2[j]
            })
            .collect()
    }
}

/// `eta` for an arbitrary score, summing the predicted jump masses beyond `u`
/// whose score reaches `beta`. Mass left in a flat tail counts as an atom at
/// infinity with score 1.
#[derive(Clone)]
pub struct GenericEta {
    score: Arc<dyn NonConformityScore>,
    model: Arc<dyn ConditionalSurvivalModel>,
    floor: f64,
}

impl GenericEta {
    pub fn new(
        score: Arc<dyn NonConformityScore>,
        model: Arc<dyn ConditionalSurvivalModel>,
        floor: f64,
    ) -> Self {
        Self { score, model, floor }
    }
}

impl std::fmt::Debug for GenericEta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GenericEta")
            .field("model", &self.model)
            .field("floor", &self.floor)
            .finish_non_exhaustive()
    }
}

impl EtaFunction for GenericEta {
    fn eta(&self, beta: f64, u: f64, x: &[f64]) -> f64 {
        let curve = self.model.predict_curve(x);
        let mass: f64 = curve
            .jumps()
            .filter(|&(t, m)| t > u && m > 0.0 && self.score.score(x, t) >= beta)
            .map(|(_, m)| m)
            .sum::<f64>()
            + curve.tail_value();
        (mass / clamp_survival(curve.evaluate(u), self.floor)).min(1.0)
    }
}
