//! Naive bounds that ignore censoring: linear quantile regression and
//! one-sided split-conformal quantile regression, on `Y` or on uncensored `T`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibrate::LowerPredictiveBound;
use crate::error::{Error, Result};
use crate::survival::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QrConfig {
    pub iterations: usize,
    /// Initial step, in units of the response's mean absolute deviation.
    pub initial_step: f64,
}

impl Default for QrConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearQuantileModel {
    pub tau: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearQuantileModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept
            + x.iter()
                .zip(&self.coefficients)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

pub fn pinball_loss(r: f64, tau: f64) -> f64 {
    if r < 0.0 {
        r * (tau - 1.0)
    } else {
        r * tau
    }
}

/// Mean pinball loss of `model` on `(x, y)`.
pub fn pinball_objective(model: &LinearQuantileModel, x: &[Vec<f64>], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(xi, &yi)| pinball_loss(yi - model.predict(xi), model.tau))
        .sum::<f64>()
        / y.len() as f64
}

struct Standardized {
    z: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

fn standardize(x: &[Vec<f64>], d: usize) -> Standardized {
    let n = x.len() as f64;
    let mut means = vec![0.0; d];
    for xi in x {
        for (m, v) in means.iter_mut().zip(xi) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; d];
    for xi in x {
        for ((s, v), m) in scales.iter_mut().zip(xi).zip(&means) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in scales.iter_mut() {
        *s = s.sqrt();
        if *s == 0.0 || !s.is_finite() {
            *s = 1.0;
        }
    }
    let z = x
        .iter()
        .map(|xi| {
            xi.iter()
                .zip(&means)
                .zip(&scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    Standardized { z, means, scales }
}

/// `[b0, b]` in standardized coordinates to the original scale.
fn unstandardize(theta: &[f64], st: &Standardized, tau: f64) -> LinearQuantileModel {
    let coefficients: Vec<f64> = theta[1..]
        .iter()
        .zip(&st.scales)
        .map(|(b, s)| b / s)
        .collect();
    let intercept = theta[0]
        - coefficients
            .iter()
            .zip(&st.means)
            .map(|(c, m)| c * m)
            .sum::<f64>();
    LinearQuantileModel {
        tau,
        intercept,
        coefficients,
    }
}

fn objective_std(theta: &[f64], z: &[Vec<f64>], y: &[f64], tau: f64) -> f64 {
    z.iter()
        .zip(y)
        .map(|(zi, &yi)| {
            let pred = theta[0] + zi.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
            pinball_loss(yi - pred, tau)
        })
        .sum::<f64>()
        / y.len() as f64
}

fn empirical_quantile(y: &[f64], tau: f64) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let idx = ((tau * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
    s[idx]
}

/// Minimizes mean pinball loss by subgradient descent with step
/// `initial_step * scale / sqrt(k + 1)`, keeping the best iterate. The result
/// is then snapped to the interpolating fit through the `d + 1` points with
/// the smallest residuals when that does not increase the objective.
pub fn pinball_qr_fit(
    x: &[Vec<f64>],
    y: &[f64],
    tau: f64,
    config: &QrConfig,
) -> Result<LinearQuantileModel> {
    fit_from(x, y, tau, config, None)
}

/// [`pinball_qr_fit`] restarted from `start` instead of the empirical
/// quantile; the result is never worse than `start`.
pub fn pinball_qr_refit(
    x: &[Vec<f64>],
    y: &[f64],
    start: &LinearQuantileModel,
    config: &QrConfig,
) -> Result<LinearQuantileModel> {
    fit_from(x, y, start.tau, config, Some(start))
}

fn fit_from(
    x: &[Vec<f64>],
    y: &[f64],
    tau: f64,
    config: &QrConfig,
    warm: Option<&LinearQuantileModel>,
) -> Result<LinearQuantileModel> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} outside (0, 1)")));
    }
    let n = y.len();
    if x.len() != n {
        return Err(Error::InvalidInput("design and response lengths differ".into()));
    }
    let d = x.first().map_or(0, Vec::len);
    if n <= d + 1 {
        return Err(Error::InvalidInput(format!(
            "degenerate design: n = {n} must exceed d + 1 = {}",
            d + 1
        )));
    }
    if x.iter().any(|xi| xi.len() != d || xi.iter().any(|v| !v.is_finite()))
        || y.iter().any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("design has ragged rows or non-finite values".into()));
    }
    let st = standardize(x, d);
    let z = &st.z;

    let start = empirical_quantile(y, tau);
    let scale = {
        let mad = y.iter().map(|v| (v - start).abs()).sum::<f64>() / n as f64;
        if mad > 0.0 {
            mad
        } else {
            1.0
        }
    };
    let mut theta = vec![0.0; d + 1];
    theta[0] = start;
    if let Some(m) = warm {
        if m.coefficients.len() != d {
            return Err(Error::InvalidInput("start model has the wrong dimension".into()));
        }
        for (j, c) in m.coefficients.iter().enumerate() {
            theta[j + 1] = c * st.scales[j];
        }
        theta[0] = m.predict(&st.means);
    }
    let mut best = theta.clone();
    let mut best_obj = objective_std(&theta, z, y, tau);
    let mut grad = vec![0.0; d + 1];
    for k in 0..config.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut obj = 0.0;
        for (zi, &yi) in z.iter().zip(y) {
            let pred = theta[0] + zi.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
            let r = yi - pred;
            obj += pinball_loss(r, tau);
            let psi = if r < 0.0 { tau - 1.0 } else { tau };
            grad[0] -= psi;
            for (g, v) in grad[1..].iter_mut().zip(zi) {
                *g -= psi * v;
            }
        }
        obj /= n as f64;
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&theta);
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt() / n as f64;
        if norm == 0.0 {
            break;
        }
        let step = config.initial_step * scale / ((k + 1) as f64).sqrt() / norm;
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= step * g / n as f64;
        }
    }
    let final_obj = objective_std(&theta, z, y, tau);
    if final_obj < best_obj {
        best_obj = final_obj;
        best = theta;
    }

    if let Some(vertex) = vertex_fit(&best, z, y, d) {
        let obj = objective_std(&vertex, z, y, tau);
        if obj <= best_obj {
            best = vertex;
        }
    }
    Ok(unstandardize(&best, &st, tau))
}

/// Exact fit through `d + 1` affinely independent observations, taken
/// greedily in order of increasing absolute residual.
fn vertex_fit(theta: &[f64], z: &[Vec<f64>], y: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut order: Vec<(f64, usize)> = z
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (zi, &yi))| {
            let pred = theta[0] + zi.iter().zip(&theta[1..]).map(|(a, b)| a * b).sum::<f64>();
            ((yi - pred).abs(), i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let p = d + 1;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut chosen = Vec::with_capacity(p);
    for &(_, i) in &order {
        let row = DVector::from_fn(p, |c, _| if c == 0 { 1.0 } else { z[i][c - 1] });
        let mut v = row.clone();
        for b in &basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-8 * row.norm() {
            basis.push(v / norm);
            chosen.push(i);
            if chosen.len() == p {
                break;
            }
        }
    }
    if chosen.len() < p {
        return None;
    }
    let a = DMatrix::from_fn(p, p, |r, c| if c == 0 { 1.0 } else { z[chosen[r]][c - 1] });
    let b = DVector::from_fn(p, |r, _| y[chosen[r]]);
    let sol = a.lu().solve(&b)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineMethod {
    #[serde(rename = "QR_Y")]
    QrY,
    #[serde(rename = "CQR_Y")]
    CqrY,
    #[serde(rename = "QR_T")]
    QrT,
    #[serde(rename = "CQR_T")]
    CqrT,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [Self::QrY, Self::CqrY, Self::QrT, Self::CqrT];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::QrY => "QR_Y",
            Self::CqrY => "CQR_Y",
            Self::QrT => "QR_T",
            Self::CqrT => "CQR_T",
        }
    }

    fn uncensored_only(self) -> bool {
        matches!(self, Self::QrT | Self::CqrT)
    }

    fn conformal(self) -> bool {
        matches!(self, Self::CqrY | Self::CqrT)
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaselineMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown baseline method `{s}`")))
    }
}

/// `L(x) = max(0, q_alpha(x) - correction)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineLpb {
    pub method: BaselineMethod,
    pub model: LinearQuantileModel,
    pub correction: f64,
}

impl LowerPredictiveBound for BaselineLpb {
    fn lower_bound(&self, x: &[f64]) -> f64 {
        (self.model.predict(x) - self.correction).max(0.0)
    }
}

fn fitting_pairs(data: &Dataset, uncensored_only: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    data.iter()
        .filter(|r| !uncensored_only || r.event)
        .map(|r| (r.covariates.clone(), r.time))
        .unzip()
}

/// The `ceil((1 - alpha)(m + 1))`-th smallest score, `+inf` past `m`.
pub fn conformal_correction(scores: &[f64], alpha: f64) -> f64 {
    let m = scores.len();
    let rank = ((1.0 - alpha) * (m as f64 + 1.0) - 1e-9).ceil() as usize;
    if rank == 0 {
        return f64::NEG_INFINITY;
    }
    if rank > m {
        return f64::INFINITY;
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s[rank - 1]
}

/// Fits the quantile model on `train`; conformal variants compute the
/// correction on `calib`.
pub fn make_baseline_lpb(
    train: &Dataset,
    calib: &Dataset,
    method: BaselineMethod,
    alpha: f64,
    config: &QrConfig,
) -> Result<BaselineLpb> {
    let (x, y) = fitting_pairs(train, method.uncensored_only());
    if y.is_empty() {
        return Err(Error::NoEvents);
    }
    let model = pinball_qr_fit(&x, &y, alpha, config)?;
    let correction = if method.conformal() {
        let (xc, yc) = fitting_pairs(calib, method.uncensored_only());
        if yc.is_empty() {
            return Err(Error::NoEvents);
        }
        let scores: Vec<f64> = xc.iter().zip(&yc).map(|(xi, yi)| model.predict(xi) - yi).collect();
        conformal_correction(&scores, alpha)
    } else {
        0.0
    };
    Ok(BaselineLpb {
        method,
        model,
        correction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercept_only_median() {
        let x = vec![vec![]; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let m = pinball_qr_fit(&x, &y, 0.5, &QrConfig::default()).unwrap();
        assert!((m.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_data_is_interpolated() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 0.1, (i % 4) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v[0] + 0.5 * v[1]).collect();
        for tau in [0.1, 0.5, 0.9] {
            let m = pinball_qr_fit(&x, &y, tau, &QrConfig::default()).unwrap();
            assert!(pinball_objective(&m, &x, &y) <= 1e-6);
        }
    }

    #[test]
    fn degenerate_design_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(pinball_qr_fit(&x, &[1.0, 2.0], 0.5, &QrConfig::default()).is_err());
        let x = vec![vec![]; 3];
        assert!(pinball_qr_fit(&x, &[1.0, 2.0, 3.0], 1.0, &QrConfig::default()).is_err());
    }

    #[test]
    fn correction_rank_rule() {
        let s: Vec<f64> = (1..=9).map(f64::from).collect();
        // ceil(0.9 * 10) = 9.
        assert_eq!(conformal_correction(&s, 0.1), 9.0);
        // ceil(0.9 * 9) = 9 > 8.
        assert_eq!(conformal_correction(&s[..8], 0.1), f64::INFINITY);
        assert_eq!(conformal_correction(&s, 0.5), 5.0);
    }

    #[test]
    fn nonpositive_scores_raise_the_bound() {
        let s: Vec<f64> = (0..20).map(|i| -0.1 * i as f64).collect();
        assert!(conformal_correction(&s, 0.1) <= 0.0);
    }

    #[test]
    fn method_names_roundtrip() {
        for m in BaselineMethod::ALL {
            assert_eq!(m.as_str().parse::<BaselineMethod>().unwrap(), m);
        }
    }
}
