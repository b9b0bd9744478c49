//! Calibration of the score threshold `beta`: HT-IPCW, Hajek IPCW, AIPCW,
//! OR and COR.

mod grid;
mod influence;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conformity::{EtaFunction, NonConformityScore};
use crate::error::{Error, Result};
use crate::nuisance::{ConditionalSurvivalModel, PointSurvival};
use crate::survival::{clamp_survival, Dataset, ObservedRecord, StepSurvivalCurve, DEFAULT_POSITIVITY_FLOOR};

pub use grid::BetaGrid;
pub use influence::{influence_components, influence_function, influence_function_lemma_form, IfComponents};

/// Slack allowed when comparing a selection statistic with zero, so that
/// sums which are exactly zero in real arithmetic are not lost to rounding.
pub const SELECTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "HT_IPCW")]
    HtIpcw,
    #[serde(rename = "IPCW")]
    Ipcw,
    #[serde(rename = "AIPCW")]
    Aipcw,
    #[serde(rename = "OR")]
    Or,
    #[serde(rename = "COR")]
    Cor,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::HtIpcw, Method::Ipcw, Method::Aipcw, Method::Or, Method::Cor];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::HtIpcw => "HT_IPCW",
            Method::Ipcw => "IPCW",
            Method::Aipcw => "AIPCW",
            Method::Or => "OR",
            Method::Cor => "COR",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown calibration method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub alpha: f64,
    pub grid: BetaGrid,
    pub positivity_floor: f64,
}

impl CalibrationConfig {
    pub fn new(alpha: f64, grid: BetaGrid, positivity_floor: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha = {alpha} outside (0, 1)")));
        }
        if !(positivity_floor > 0.0 && positivity_floor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "positivity floor {positivity_floor} outside (0, 1)"
            )));
        }
        Ok(Self {
            alpha,
            grid,
            positivity_floor,
        })
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            grid: BetaGrid::default(),
            positivity_floor: DEFAULT_POSITIVITY_FLOOR,
        }
    }
}

/// Nuisances handed to [`calibrate`]; which ones are required depends on the
/// method.
#[derive(Clone, Copy, Default)]
pub struct Nuisances<'a> {
    pub score: Option<&'a dyn NonConformityScore>,
    pub censor_model: Option<&'a dyn PointSurvival>,
    pub eta: Option<&'a dyn EtaFunction>,
    pub survival_model: Option<&'a dyn ConditionalSurvivalModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub method: Method,
    pub alpha: f64,
    pub beta_hat: f64,
    /// No grid level satisfied the selection rule; `beta_hat` fell back to 0.
    pub degenerate: bool,
    pub grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hajek_w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augmentation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ht_coverage: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub or_coverage: Option<Vec<f64>>,
}

impl CalibrationResult {
    pub fn flag(&self) -> &'static str {
        if self.degenerate {
            "degenerate_selection"
        } else {
            ""
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A lower predictive bound `x -> L(x)`.
pub trait LowerPredictiveBound: Send + Sync {
    fn lower_bound(&self, x: &[f64]) -> f64;

    fn covers(&self, x: &[f64], t: f64) -> bool {
        t >= self.lower_bound(x)
    }
}

/// Calibrated bound `{t : score(x, t) >= beta_hat} = [L(x), inf)`.
#[derive(Clone)]
pub struct LPBModel {
    score: Arc<dyn NonConformityScore>,
    beta_hat: f64,
}

impl LPBModel {
    pub fn new(score: Arc<dyn NonConformityScore>, beta_hat: f64) -> Self {
        Self { score, beta_hat }
    }

    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn score(&self) -> &Arc<dyn NonConformityScore> {
        &self.score
    }
}

impl LowerPredictiveBound for LPBModel {
    fn lower_bound(&self, x: &[f64]) -> f64 {
        self.score.lower_bound(x, self.beta_hat)
    }

    fn covers(&self, x: &[f64], t: f64) -> bool {
        self.score.score(x, t) >= self.beta_hat
    }
}

/// Per-record `Delta_i / clamp(S_C(Y_i | X_i))` and `R(X_i, Y_i)`.
pub(crate) fn ipcw_terms(
    data: &Dataset,
    score: &dyn NonConformityScore,
    censor: &dyn PointSurvival,
    floor: f64,
) -> (Vec<f64>, Vec<f64>) {
    data.iter()
        .map(|r| {
            let w = if r.event {
                1.0 / clamp_survival(censor.survival_at(&r.covariates, r.time), floor)
            } else {
                0.0
            };
            (w, score.score(&r.covariates, r.time))
        })
        .unzip()
}

fn ht_from_terms(weights: &[f64], scores: &[f64], beta: f64) -> f64 {
    let s: f64 = weights
        .iter()
        .zip(scores)
        .map(|(&w, &r)| if r >= beta { w } else { 0.0 })
        .sum();
    s / weights.len() as f64
}

fn hajek_from_terms(weights: &[f64], scores: &[f64], beta: f64, alpha: f64) -> f64 {
    let c = 1.0 - alpha;
    let s: f64 = weights
        .iter()
        .zip(scores)
        .map(|(&w, &r)| w * (if r >= beta { 1.0 } else { 0.0 } - c))
        .sum();
    s / weights.len() as f64
}

/// `(1/n) sum_i Delta_i 1{R(X_i, Y_i) >= beta} / clamp(S_C(Y_i | X_i))`.
pub fn ht_ipcw_coverage(
    calib: &Dataset,
    score: &dyn NonConformityScore,
    censor: &dyn PointSurvival,
    beta: f64,
    floor: f64,
) -> Result<f64> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (w, s) = ipcw_terms(calib, score, censor, floor);
    Ok(ht_from_terms(&w, &s, beta))
}

/// `W(beta) = (1/n) sum_i Delta_i (1{R >= beta} - (1 - alpha)) / clamp(S_C(Y_i | X_i))`.
pub fn hajek_w(
    calib: &Dataset,
    score: &dyn NonConformityScore,
    censor: &dyn PointSurvival,
    beta: f64,
    alpha: f64,
    floor: f64,
) -> Result<f64> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (w, s) = ipcw_terms(calib, score, censor, floor);
    Ok(hajek_from_terms(&w, &s, beta, alpha))
}

/// Largest grid level whose statistic is nonnegative, or `(0, true)` when
/// none is.
pub fn select_beta(grid: &[f64], stats: &[f64]) -> (f64, bool) {
    debug_assert_eq!(grid.len(), stats.len());
    match stats.iter().rposition(|&v| v >= -SELECTION_TOLERANCE) {
        Some(i) => (grid[i], false),
        None => (grid.first().copied().unwrap_or(0.0), true),
    }
}

/// `M(u_k) - M(u_{k-1})` for `M(u) = 1{Y <= u, Delta = 0} + log clamp(S_C(Y ^ u))`
/// and `M(u_0 = 0) = 0`, given `S_C` at the censoring times and at `Y`.
pub(crate) fn increments_from_values(
    record: &ObservedRecord,
    times: &[f64],
    sc_times: &[f64],
    sc_y: f64,
    floor: f64,
) -> Vec<f64> {
    let at_y = if record.event { 0.0 } else { 1.0 } + clamp_survival(sc_y, floor).ln();
    let mut prev = 0.0;
    times
        .iter()
        .zip(sc_times)
        .map(|(&u, &s)| {
            let m = if u < record.time {
                clamp_survival(s, floor).ln()
            } else {
                at_y
            };
            let inc = m - prev;
            prev = m;
            inc
        })
        .collect()
}

pub fn martingale_increments(
    record: &ObservedRecord,
    censor_curve: &StepSurvivalCurve,
    censor_times: &[f64],
    floor: f64,
) -> Vec<f64> {
    let sc_times = censor_curve.evaluate_sorted(censor_times);
    let sc_y = censor_curve.evaluate(record.time);
    increments_from_values(record, censor_times, &sc_times, sc_y, floor)
}

/// `S_C(u_k | x)` for the censoring times `u_k < Y` that matter, `S_C(Y | x)`,
/// and the number of censoring times up to and including the first `u_k >= Y`.
fn censor_profile(
    censor: &dyn PointSurvival,
    record: &ObservedRecord,
    times: &[f64],
) -> (Vec<f64>, f64, usize) {
    let below = times.partition_point(|&u| u < record.time);
    let active = (below + 1).min(times.len());
    let mut query: Vec<f64> = times[..below].to_vec();
    query.push(record.time);
    if active > below {
        query.push(times[below]);
    }
    let mut vals = censor.survival_at_sorted(&record.covariates, &query);
    let sc_y = vals[below];
    vals.remove(below);
    (vals, sc_y, active)
}

/// Per-record `a_k = dM_k / clamp(S_C(u_k | X))`, truncated after the first
/// censoring time at or beyond `Y` (later increments vanish).
pub(crate) fn augmentation_weights(
    record: &ObservedRecord,
    censor: &dyn PointSurvival,
    times: &[f64],
    floor: f64,
) -> Vec<f64> {
    let (sc, sc_y, active) = censor_profile(censor, record, times);
    let inc = increments_from_values(record, &times[..active], &sc, sc_y, floor);
    inc.iter()
        .zip(&sc)
        .map(|(d, s)| d / clamp_survival(*s, floor))
        .collect()
}

/// `Pi(beta)` on every level of `betas` (ascending), centering at `center`.
pub(crate) fn augmentation_profile(
    data: &Dataset,
    eta: &dyn EtaFunction,
    censor: &dyn PointSurvival,
    betas: &[f64],
    center: f64,
    floor: f64,
    times: &[f64],
) -> Vec<f64> {
    let mut total = vec![0.0; betas.len()];
    for r in data.iter() {
        let a = augmentation_weights(r, censor, times, floor);
        if a.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mass: f64 = a.iter().sum();
        let prof = eta.weighted_profile(&r.covariates, &times[..a.len()], &a, betas);
        for (t, p) in total.iter_mut().zip(prof) {
            *t += p - center * mass;
        }
    }
    let n = data.len() as f64;
    total.iter().map(|t| t / n).collect()
}

/// `Pi(beta) = (1/n) sum_i sum_k (eta(beta, u_k | X_i) - (1 - alpha)) / clamp(S_C(u_k | X_i)) dM_ik`
/// over the distinct censoring times of `calib`.
pub fn augmentation_pi(
    calib: &Dataset,
    eta: &dyn EtaFunction,
    censor: &dyn PointSurvival,
    beta: f64,
    alpha: f64,
    floor: f64,
) -> Result<f64> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let times = calib.censoring_times();
    Ok(augmentation_profile(calib, eta, censor, &[beta], 1.0 - alpha, floor, &times)[0])
}

/// `(1/n) sum_i S_T(q(beta | X_i) | X_i)` on every grid level.
pub fn or_coverage_profile(
    data: &Dataset,
    model: &dyn ConditionalSurvivalModel,
    betas: &[f64],
) -> Vec<f64> {
    let mut total = vec![0.0; betas.len()];
    for r in data.iter() {
        let curve = model.predict_curve(&r.covariates);
        let qs = curve.quantiles_sorted(betas);
        for (t, q) in total.iter_mut().zip(qs) {
            *t += if q.is_finite() {
                curve.evaluate(q)
            } else {
                curve.tail_value()
            };
        }
    }
    let n = data.len() as f64;
    total.iter().map(|t| t / n).collect()
}

fn require<'a, T: ?Sized>(v: Option<&'a T>, method: Method, what: &'static str) -> Result<&'a T> {
    v.ok_or_else(|| Error::MissingNuisance {
        method: method.to_string(),
        what,
    })
}

pub fn calibrate(
    calib: &Dataset,
    nuisances: &Nuisances<'_>,
    config: &CalibrationConfig,
    method: Method,
) -> Result<CalibrationResult> {
    let grid = config.grid.values();
    let alpha = config.alpha;
    let floor = config.positivity_floor;
    let mut result = CalibrationResult {
        method,
        alpha,
        beta_hat: alpha,
        degenerate: false,
        grid: grid.to_vec(),
        hajek_w: None,
        augmentation: None,
        ht_coverage: None,
        or_coverage: None,
    };
    if method == Method::Or {
        result.grid.clear();
        return Ok(result);
    }
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let c = 1.0 - alpha;
    let stats: Vec<f64> = match method {
        Method::Or => unreachable!(),
        Method::HtIpcw | Method::Ipcw | Method::Aipcw => {
            let score = require(nuisances.score, method, "score")?;
            let censor = require(nuisances.censor_model, method, "censoring model")?;
            let (w, s) = ipcw_terms(calib, score, censor, floor);
            if method == Method::HtIpcw {
                let ht: Vec<f64> = grid.iter().map(|&b| ht_from_terms(&w, &s, b)).collect();
                let stats = ht.iter().map(|p| p - c).collect();
                result.ht_coverage = Some(ht);
                stats
            } else {
                let wv: Vec<f64> = grid
                    .iter()
                    .map(|&b| hajek_from_terms(&w, &s, b, alpha))
                    .collect();
                let stats = if method == Method::Aipcw {
                    let eta = require(nuisances.eta, method, "eta")?;
                    let times = calib.censoring_times();
                    let pi = augmentation_profile(calib, eta, censor, grid, c, floor, &times);
                    let stats = wv.iter().zip(&pi).map(|(a, b)| a + b).collect();
                    result.augmentation = Some(pi);
                    stats
                } else {
                    wv.clone()
                };
                result.hajek_w = Some(wv);
                stats
            }
        }
        Method::Cor => {
            let model = require(nuisances.survival_model, method, "survival model")?;
            let cov = or_coverage_profile(calib, model, grid);
            let stats = cov.iter().map(|p| p - c).collect();
            result.or_coverage = Some(cov);
            stats
        }
    };
    let (beta_hat, degenerate) = select_beta(grid, &stats);
    result.beta_hat = beta_hat;
    result.degenerate = degenerate;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Score equal to a fixed per-time lookup: R(x, t) = x[0].
    struct CovScore;
    impl NonConformityScore for CovScore {
        fn score(&self, x: &[f64], _t: f64) -> f64 {
            x[0]
        }
    }

    /// S_C(t | x) = x[1].
    struct CovCensor;
    impl PointSurvival for CovCensor {
        fn survival_at(&self, x: &[f64], _t: f64) -> f64 {
            x[1]
        }
    }

    fn rows(rows: &[(f64, f64, f64, bool)]) -> Dataset {
        Dataset::new(
            2,
            rows.iter()
                .map(|&(s, sc, t, e)| ObservedRecord::new(vec![s, sc], t, e).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ht_hand_examples() {
        let d = rows(&[(0.2, 1.0, 1.0, true), (0.5, 1.0, 2.0, true), (0.9, 1.0, 3.0, true)]);
        assert!((ht_ipcw_coverage(&d, &CovScore, &CovCensor, 0.4, 0.05).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let d0 = rows(&[(0.2, 1.0, 1.0, false), (0.9, 1.0, 3.0, false)]);
        assert_eq!(ht_ipcw_coverage(&d0, &CovScore, &CovCensor, 0.4, 0.05).unwrap(), 0.0);
        let d2 = rows(&[(0.9, 0.5, 1.0, true), (0.9, 0.25, 2.0, true)]);
        assert_eq!(ht_ipcw_coverage(&d2, &CovScore, &CovCensor, 0.5, 0.05).unwrap(), 3.0);
    }

    #[test]
    fn hajek_hand_examples() {
        let d = rows(&[(0.2, 1.0, 1.0, true), (0.5, 1.0, 2.0, true), (0.9, 1.0, 3.0, true)]);
        assert!((hajek_w(&d, &CovScore, &CovCensor, 0.0, 0.1, 0.05).unwrap() - 0.1).abs() < 1e-15);
        assert!((hajek_w(&d, &CovScore, &CovCensor, 0.901, 0.1, 0.05).unwrap() + 0.9).abs() < 1e-15);
        let d2 = rows(&[(0.9, 0.5, 1.0, true), (0.1, 0.25, 2.0, true)]);
        assert!((hajek_w(&d2, &CovScore, &CovCensor, 0.5, 0.1, 0.05).unwrap() + 1.7).abs() < 1e-15);
    }

    #[test]
    fn select_beta_examples() {
        let grid = BetaGrid::default();
        let g = grid.values();
        assert_eq!(select_beta(g, &vec![0.3; g.len()]), (1.0, false));
        let lin: Vec<f64> = g.iter().map(|b| 0.1 - b).collect();
        assert_eq!(select_beta(g, &lin), (0.1, false));
        assert_eq!(select_beta(g, &vec![-0.1; g.len()]), (0.0, true));
    }

    #[test]
    fn martingale_hand_examples() {
        let one = StepSurvivalCurve::constant_one();
        let r = ObservedRecord::new(vec![], 1.5, true).unwrap();
        assert!(martingale_increments(&r, &one, &[0.5, 1.0, 2.0], 0.05).iter().all(|&v| v == 0.0));

        let half = StepSurvivalCurve::new(vec![1.0], vec![0.5]).unwrap();
        let r = ObservedRecord::new(vec![], 1.0, false).unwrap();
        let inc = martingale_increments(&r, &half, &[1.0], 0.05);
        assert_eq!(inc, vec![1.0 + 0.5f64.ln()]);
        assert!((inc[0] - 0.3069).abs() < 1e-4);

        let c = StepSurvivalCurve::new(vec![0.5, 2.0, 3.0], vec![0.8, 0.6, 0.3]).unwrap();
        let r = ObservedRecord::new(vec![], 1.0, true).unwrap();
        let inc = martingale_increments(&r, &c, &[0.5, 2.0, 3.0], 0.05);
        assert!((inc[0] - 0.8f64.ln()).abs() < 1e-15);
        assert_eq!(&inc[1..], &[0.0, 0.0]);
    }

    struct ConstEta(f64);
    impl EtaFunction for ConstEta {
        fn eta(&self, _b: f64, _u: f64, _x: &[f64]) -> f64 {
            self.0
        }
    }

    struct CurveCensor(StepSurvivalCurve);
    impl PointSurvival for CurveCensor {
        fn survival_at(&self, _x: &[f64], t: f64) -> f64 {
            self.0.evaluate(t)
        }
    }

    #[test]
    fn augmentation_hand_examples() {
        let sc = CurveCensor(StepSurvivalCurve::new(vec![1.0], vec![0.5]).unwrap());
        let d = Dataset::new(0, vec![ObservedRecord::new(vec![], 1.0, false).unwrap()]).unwrap();
        // Before u_1 the curve is 1, at u_1 it is 0.5: a = (1 + ln 0.5) / 0.5.
        let pi = augmentation_pi(&d, &ConstEta(1.0), &sc, 0.5, 0.1, 0.05).unwrap();
        assert!((pi - 0.1 / 0.5 * (1.0 + 0.5f64.ln())).abs() < 1e-15);
        assert!((pi - 0.0614).abs() < 1e-4);
        let pi = augmentation_pi(&d, &ConstEta(0.9), &sc, 0.5, 0.1, 0.05).unwrap();
        assert!(pi.abs() < 1e-15);
        let d = Dataset::new(0, vec![ObservedRecord::new(vec![], 1.0, true).unwrap()]).unwrap();
        assert_eq!(augmentation_pi(&d, &ConstEta(1.0), &sc, 0.5, 0.1, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn calibrate_dispatch() {
        let cfg = CalibrationConfig::default();
        let d = rows(&[(0.9, 0.5, 1.0, true), (0.1, 0.25, 2.0, true)]);
        let or = calibrate(&d, &Nuisances::default(), &cfg, Method::Or).unwrap();
        assert_eq!(or.beta_hat, 0.1);
        let err = calibrate(&d, &Nuisances::default(), &cfg, Method::Ipcw).unwrap_err();
        assert!(matches!(err, Error::MissingNuisance { .. }));
        let nu = Nuisances {
            score: Some(&CovScore),
            censor_model: Some(&CovCensor),
            ..Default::default()
        };
        // W(beta) = (2 (1{0.9 >= b} - 0.9) + 4 (1{0.1 >= b} - 0.9)) / 2:
        // 0.1 up to 0.1, -1.7 up to 0.9, then -2.7.
        let ipcw = calibrate(&d, &nu, &cfg, Method::Ipcw).unwrap();
        assert_eq!(ipcw.beta_hat, 0.1);
        assert!(!ipcw.degenerate);
        let json = ipcw.to_json().unwrap();
        let back: CalibrationResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ipcw);
        assert!(json.contains("\"IPCW\""));
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }
}
