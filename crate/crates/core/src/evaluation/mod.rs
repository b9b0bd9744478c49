//! Test-set coverage metrics and bound summaries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calibrate::{augmentation_weights, LowerPredictiveBound};
use crate::conformity::EtaFunction;
use crate::error::{Error, Result};
use crate::nuisance::{ConditionalSurvivalModel, PointSurvival};
use crate::survival::{clamp_survival, Dataset, FullRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Oracle,
    Ipcw,
    Aipcw,
    Or,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Ipcw => "ipcw",
            Self::Aipcw => "aipcw",
            Self::Or => "or",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub method: String,
    pub estimator: String,
    pub metric: MetricKind,
    /// `None` when the metric is undefined (e.g. no uncensored test records).
    pub coverage: Option<f64>,
    pub n_test: usize,
    pub mean_lpb: Option<f64>,
    pub median_lpb: Option<f64>,
}

/// `(1/n) sum_i 1{T_i >= L(X_i)}`; an infinite bound never covers.
pub fn oracle_coverage(test: &[FullRecord], lpb: &dyn LowerPredictiveBound) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = test
        .iter()
        .filter(|r| {
            let l = lpb.lower_bound(&r.covariates);
            l.is_finite() && r.event_time >= l
        })
        .count();
    Ok(hits as f64 / test.len() as f64)
}

fn ipcw_parts(
    test: &Dataset,
    lpb: &dyn LowerPredictiveBound,
    censor: &dyn PointSurvival,
    floor: f64,
) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in test.iter().filter(|r| r.event) {
        let w = 1.0 / clamp_survival(censor.survival_at(&r.covariates, r.time), floor);
        den += w;
        if lpb.covers(&r.covariates, r.time) {
            num += w;
        }
    }
    (num, den)
}

/// Hajek ratio `sum Delta w 1{covered} / sum Delta w`; `None` for 0/0.
pub fn ipcw_coverage_metric(
    test: &Dataset,
    lpb: &dyn LowerPredictiveBound,
    censor: &dyn PointSurvival,
    floor: f64,
) -> Option<f64> {
    let (num, den) = ipcw_parts(test, lpb, censor, floor);
    (den > 0.0).then(|| num / den)
}

/// Hajek estimate `P` plus `sum_i sum_k (eta(beta_hat, u_k | X_i) - P) a_ik / sum Delta w`,
/// with `u_k` the distinct censoring times of `test`.
pub fn aipcw_coverage_metric(
    test: &Dataset,
    lpb: &dyn LowerPredictiveBound,
    eta: &dyn EtaFunction,
    censor: &dyn PointSurvival,
    beta_hat: f64,
    floor: f64,
) -> Option<f64> {
    let (num, den) = ipcw_parts(test, lpb, censor, floor);
    if den <= 0.0 {
        return None;
    }
    let p = num / den;
    let times = test.censoring_times();
    let mut aug = 0.0;
    for r in test.iter() {
        let a = augmentation_weights(r, censor, &times, floor);
        if a.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mass: f64 = a.iter().sum();
        let prof = eta.weighted_profile(&r.covariates, &times[..a.len()], &a, &[beta_hat])[0];
        aug += prof - p * mass;
    }
    Some(p + aug / den)
}

/// `(1/n) sum_i S_T(q(beta_hat | X_i) | X_i)`.
pub fn or_coverage_metric(
    test: &Dataset,
    model: &dyn ConditionalSurvivalModel,
    beta_hat: f64,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(crate::calibrate::or_coverage_profile(test, model, &[beta_hat])[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpbSummary {
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub lower_quartile: Option<f64>,
    pub upper_quartile: Option<f64>,
    pub n_finite: usize,
    pub n_sentinel: usize,
}

/// Linear-interpolation quantile of sorted values.
fn sorted_quantile(s: &[f64], p: f64) -> f64 {
    let h = p * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Order statistics over the finite bounds; infinite ones are counted apart.
pub fn lpb_summary(bounds: &[f64]) -> LpbSummary {
    let mut s: Vec<f64> = bounds.iter().copied().filter(|v| v.is_finite()).collect();
    let n_sentinel = bounds.len() - s.len();
    if s.is_empty() {
        return LpbSummary {
            mean: None,
            median: None,
            lower_quartile: None,
            upper_quartile: None,
            n_finite: 0,
            n_sentinel,
        };
    }
    s.sort_by(f64::total_cmp);
    LpbSummary {
        mean: Some(s.iter().sum::<f64>() / s.len() as f64),
        median: Some(sorted_quantile(&s, 0.5)),
        lower_quartile: Some(sorted_quantile(&s, 0.25)),
        upper_quartile: Some(sorted_quantile(&s, 0.75)),
        n_finite: s.len(),
        n_sentinel,
    }
}

/// Bounds for every covariate row.
pub fn predict_bounds<'a, I>(lpb: &dyn LowerPredictiveBound, xs: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    xs.into_iter().map(|x| lpb.lower_bound(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::ObservedRecord;

    struct Const(f64);
    impl LowerPredictiveBound for Const {
        fn lower_bound(&self, _x: &[f64]) -> f64 {
            self.0
        }
    }

    struct CovCensor;
    impl PointSurvival for CovCensor {
        fn survival_at(&self, x: &[f64], _t: f64) -> f64 {
            x[0]
        }
    }

    fn full(ts: &[f64]) -> Vec<FullRecord> {
        ts.iter()
            .map(|&t| FullRecord {
                covariates: vec![],
                event_time: t,
                censor_time: f64::INFINITY,
            })
            .collect()
    }

    #[test]
    fn oracle_examples() {
        let f = full(&[1.0, 2.0, 3.0]);
        assert_eq!(oracle_coverage(&f, &Const(0.0)).unwrap(), 1.0);
        assert_eq!(oracle_coverage(&f, &Const(f64::INFINITY)).unwrap(), 0.0);
        assert!((oracle_coverage(&f, &Const(2.0)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(oracle_coverage(&[], &Const(0.0)).is_err());
    }

    #[test]
    fn ipcw_examples() {
        let d = Dataset::new(
            1,
            vec![
                ObservedRecord::new(vec![0.5], 3.0, true).unwrap(),
                ObservedRecord::new(vec![0.25], 1.0, true).unwrap(),
                ObservedRecord::new(vec![0.25], 0.5, false).unwrap(),
            ],
        )
        .unwrap();
        let v = ipcw_coverage_metric(&d, &Const(2.0), &CovCensor, 0.05).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ipcw_coverage_metric(&d, &Const(0.0), &CovCensor, 0.05), Some(1.0));
        let none = Dataset::new(1, vec![ObservedRecord::new(vec![0.5], 1.0, false).unwrap()]).unwrap();
        assert_eq!(ipcw_coverage_metric(&none, &Const(0.0), &CovCensor, 0.05), None);
    }

    #[test]
    fn summary_examples() {
        let s = lpb_summary(&[2.0, 2.0, 2.0]);
        assert_eq!((s.mean, s.median, s.n_sentinel), (Some(2.0), Some(2.0), 0));
        assert_eq!(lpb_summary(&[1.0, 2.0, 3.0, 4.0]).median, Some(2.5));
        let s = lpb_summary(&[1.0, f64::INFINITY, 3.0]);
        assert_eq!((s.n_sentinel, s.n_finite, s.median), (1, 2, Some(2.0)));
        assert_eq!(lpb_summary(&[]).mean, None);
    }
}
