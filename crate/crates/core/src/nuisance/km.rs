use super::{ConditionalSurvivalModel, TargetKind};
use crate::error::{Error, Result};
use crate::survival::{Dataset, StepSurvivalCurve};

/// Covariate-independent Kaplan-Meier fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    curve: StepSurvivalCurve,
}

impl KaplanMeier {
    pub fn curve(&self) -> &StepSurvivalCurve {
        &self.curve
    }
}

impl ConditionalSurvivalModel for KaplanMeier {
    fn predict_curve(&self, _x: &[f64]) -> StepSurvivalCurve {
        self.curve.clone()
    }
}

pub fn km_fit(data: &Dataset, target: TargetKind) -> Result<KaplanMeier> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut obs: Vec<(f64, bool)> = data
        .iter()
        .map(|r| (r.time, target.indicator(r)))
        .collect();
    Ok(KaplanMeier {
        curve: product_limit(&mut obs),
    })
}

/// Product-limit estimate from `(time, indicator)` pairs. One knot per
/// distinct time with at least one event; no events gives the constant 1
/// curve; a censored last observation leaves a flat tail.
pub fn product_limit(obs: &mut [(f64, bool)]) -> StepSurvivalCurve {
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_risk = obs.len();
    let mut s = 1.0;
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut j = i;
        let mut events = 0usize;
        while j < obs.len() && obs[j].0 == t {
            if obs[j].1 {
                events += 1;
            }
            j += 1;
        }
        if events > 0 {
            s *= (at_risk - events) as f64 / at_risk as f64;
            knots.push(t);
            values.push(s);
        }
        at_risk -= j - i;
        i = j;
    }
    StepSurvivalCurve::from_parts_unchecked(knots, values)
}
