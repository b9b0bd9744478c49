//! Cox proportional hazards with Breslow ties and a Breslow baseline hazard.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ConditionalSurvivalModel, TargetKind};
use crate::error::{Error, Result};
use crate::survival::{CumulativeHazard, Dataset, StepSurvivalCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Convergence threshold on the Euclidean norm of the score.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
        }
    }
}

/// Fitted Cox model. Covariates are centered at the training means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub coefficients: Vec<f64>,
    pub covariate_means: Vec<f64>,
    pub baseline_cumhaz: CumulativeHazard,
}

impl CoxModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.covariate_means)
            .zip(&self.coefficients)
            .map(|((xi, m), b)| (xi - m) * b)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl ConditionalSurvivalModel for CoxModel {
    fn predict_curve(&self, x: &[f64]) -> StepSurvivalCurve {
        self.baseline_cumhaz
            .to_survival(self.linear_predictor(x).exp())
    }
}

/// Centered design sorted by descending time, grouped by tied times.
struct RiskSetData {
    x: Vec<Vec<f64>>,
    time: Vec<f64>,
    status: Vec<bool>,
    /// `(start, end)` ranges of equal times, in descending time order.
    groups: Vec<(usize, usize)>,
}

impl RiskSetData {
    fn new(data: &Dataset, target: TargetKind, means: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..data.len()).collect();
        let recs = data.records();
        order.sort_by(|&a, &b| recs[b].time.total_cmp(&recs[a].time).then(a.cmp(&b)));
        let x: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| {
                recs[i]
                    .covariates
                    .iter()
                    .zip(means)
                    .map(|(v, m)| v - m)
                    .collect()
            })
            .collect();
        let time: Vec<f64> = order.iter().map(|&i| recs[i].time).collect();
        let status: Vec<bool> = order.iter().map(|&i| target.indicator(&recs[i])).collect();
        let mut groups = Vec::new();
        let mut i = 0;
        while i < time.len() {
            let mut j = i + 1;
            while j < time.len() && time[j] == time[i] {
                j += 1;
            }
            groups.push((i, j));
            i = j;
        }
        Self {
            x,
            time,
            status,
            groups,
        }
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .map(|xi| xi.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let eta = self.eta(beta);
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut ll = 0.0;
        for &(a, b) in &self.groups {
            for i in a..b {
                s0 += (eta[i] - shift).exp();
            }
            let log_s0 = s0.ln() + shift;
            for i in a..b {
                if self.status[i] {
                    ll += eta[i] - log_s0;
                }
            }
        }
        ll
    }

    /// Log partial likelihood, score and observed information.
    fn derivatives(&self, beta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = beta.len();
        let eta = self.eta(beta);
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(d);
        let mut s2 = DMatrix::<f64>::zeros(d, d);
        let mut ll = 0.0;
        let mut grad = DVector::<f64>::zeros(d);
        let mut info = DMatrix::<f64>::zeros(d, d);
        for &(a, b) in &self.groups {
            for i in a..b {
                let w = (eta[i] - shift).exp();
                s0 += w;
                let xi = DVector::from_column_slice(&self.x[i]);
                s1.axpy(w, &xi, 1.0);
                s2.ger(w, &xi, &xi, 1.0);
            }
            let events = (a..b).filter(|&i| self.status[i]).count();
            if events == 0 {
                continue;
            }
            let log_s0 = s0.ln() + shift;
            let mean = &s1 / s0;
            for i in a..b {
                if self.status[i] {
                    ll += eta[i] - log_s0;
                    let xi = DVector::from_column_slice(&self.x[i]);
                    grad += xi - &mean;
                }
            }
            let mut cov = &s2 / s0;
            cov.ger(-1.0, &mean, &mean, 1.0);
            info += cov * events as f64;
        }
        (ll, grad, info)
    }

    /// Breslow increments `d_k / sum_{j at risk} exp(eta_j)` at distinct
    /// event times, ascending.
    fn breslow(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let eta = self.eta(beta);
        let mut s0 = 0.0;
        let mut knots = Vec::new();
        let mut incs = Vec::new();
        for &(a, b) in &self.groups {
            for e in &eta[a..b] {
                s0 += e.exp();
            }
            let events = (a..b).filter(|&i| self.status[i]).count();
            if events > 0 {
                knots.push(self.time[a]);
                incs.push(events as f64 / s0);
            }
        }
        knots.reverse();
        incs.reverse();
        (knots, incs)
    }
}

fn column_means(data: &Dataset) -> Vec<f64> {
    let n = data.len() as f64;
    let mut means = vec![0.0; data.dim()];
    for r in data.iter() {
        for (m, v) in means.iter_mut().zip(&r.covariates) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    means
}

/// Log partial likelihood (Breslow ties) at `coefficients`, with covariates
/// centered at the dataset means.
pub fn partial_log_likelihood(data: &Dataset, target: TargetKind, coefficients: &[f64]) -> f64 {
    let means = column_means(data);
    RiskSetData::new(data, target, &means).log_likelihood(coefficients)
}

pub fn cox_fit(data: &Dataset, target: TargetKind, config: &NewtonConfig) -> Result<CoxModel> {
    cox_fit_traced(data, target, config).map(|(m, _)| m)
}

/// Like [`cox_fit`], also returning the log partial likelihood after every
/// accepted Newton step (starting value first).
pub fn cox_fit_traced(
    data: &Dataset,
    target: TargetKind,
    config: &NewtonConfig,
) -> Result<(CoxModel, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !data.iter().any(|r| target.indicator(r)) {
        return Err(Error::NoEvents);
    }
    let d = data.dim();
    let means = column_means(data);
    for j in 0..d {
        let first = data.records()[0].covariates[j];
        if data.iter().all(|r| r.covariates[j] == first) {
            return Err(Error::SingularInformation);
        }
    }
    let rs = RiskSetData::new(data, target, &means);

    let mut beta = vec![0.0; d];
    let (mut ll, mut grad, mut info) = rs.derivatives(&beta);
    let mut trace = vec![ll];
    let mut iter = 0;
    while grad.norm() > config.tol {
        if iter == config.max_iter {
            return Err(Error::NonConvergence {
                iterations: iter,
                gradient_norm: grad.norm(),
            });
        }
        iter += 1;
        let chol = info.clone().cholesky().ok_or(Error::SingularInformation)?;
        let step = chol.solve(&grad);
        if !step.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularInformation);
        }
        // Inside the quadratic region a full step is safe even when rounding
        // hides the likelihood increase.
        let decrement = step.dot(&grad);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let cand: Vec<f64> = beta
                .iter()
                .zip(step.iter())
                .map(|(b, s)| b + scale * s)
                .collect();
            let cand_ll = rs.log_likelihood(&cand);
            if cand_ll.is_finite() && (cand_ll >= ll || (scale == 1.0 && decrement < 1e-12)) {
                accepted = Some(cand);
                break;
            }
            scale *= 0.5;
        }
        let Some(cand) = accepted else {
            return Err(Error::NonConvergence {
                iterations: iter,
                gradient_norm: grad.norm(),
            });
        };
        beta = cand;
        (ll, grad, info) = rs.derivatives(&beta);
        trace.push(ll);
    }

    let (knots, incs) = rs.breslow(&beta);
    let baseline_cumhaz = CumulativeHazard::new(knots, incs)?;
    Ok((
        CoxModel {
            coefficients: beta,
            covariate_means: means,
            baseline_cumhaz,
        },
        trace,
    ))
}
