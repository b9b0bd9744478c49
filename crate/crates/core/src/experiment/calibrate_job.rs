use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::EstimatorSpec;
use super::runner::fit_estimator;
use crate::calibrate::{calibrate, BetaGrid, CalibrationConfig, CalibrationResult, LPBModel, LowerPredictiveBound, Method, Nuisances};
use crate::conformity::{QuantileEta, QuantileScore};
use crate::error::{Error, Result};
use crate::nuisance::TargetKind;
use crate::survival::{split_dataset, Dataset, DEFAULT_POSITIVITY_FLOOR};

fn default_method() -> String {
    "AIPCW".into()
}
fn default_estimator() -> String {
    "cox".into()
}
fn default_alpha() -> f64 {
    0.1
}
fn default_grid_step() -> f64 {
    0.001
}
fn default_floor() -> f64 {
    DEFAULT_POSITIVITY_FLOOR
}
fn default_fraction() -> f64 {
    0.5
}

/// Fit-and-calibrate job on a single observed dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateJob {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
    /// Share of records used for calibration; the rest fit the nuisances.
    #[serde(default = "default_fraction")]
    pub calib_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub knn_k: Option<usize>,
}

impl Default for CalibrateJob {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl CalibrateJob {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
        })
    }
}

/// Output of [`run_calibrate`]: the calibration record and, for every input
/// row, its split and bound.
#[derive(Debug, Clone)]
pub struct CalibrateOutput {
    pub result: CalibrationResult,
    pub in_calibration: Vec<bool>,
    pub bounds: Vec<f64>,
}

pub fn run_calibrate(data: &Dataset, job: &CalibrateJob) -> Result<CalibrateOutput> {
    let method: Method = job.method.parse()?;
    let est: EstimatorSpec = job.estimator.parse()?;
    let cal = CalibrationConfig::new(job.alpha, BetaGrid::uniform(job.grid_step)?, job.positivity_floor)?;
    let split = split_dataset(data, job.calib_fraction, job.seed)?;
    let train = data.subset(&split.train);
    let calib = data.subset(&split.calib);
    let event = fit_estimator(est.event, &train, TargetKind::EventTime, job.knn_k)?;
    let censoring = fit_estimator(est.censoring, &train, TargetKind::CensoringTime, job.knn_k)?;
    let score = std::sync::Arc::new(QuantileScore::new(event.clone(), cal.grid.clone()));
    let eta = QuantileEta::new(event.clone(), cal.positivity_floor);
    let nu = Nuisances {
        score: Some(score.as_ref()),
        censor_model: Some(&censoring),
        eta: Some(&eta),
        survival_model: Some(event.as_ref()),
    };
    let result = calibrate(&calib, &nu, &cal, method)?;
    let lpb = LPBModel::new(score, result.beta_hat);
    let mut in_calibration = vec![false; data.len()];
    for &i in &split.calib {
        in_calibration[i] = true;
    }
    let bounds = data.iter().map(|r| lpb.lower_bound(&r.covariates)).collect();
    Ok(CalibrateOutput {
        result,
        in_calibration,
        bounds,
    })
}

/// `index,split,lpb` rows; infinite bounds are written as `inf`.
pub fn write_bounds<W: Write>(writer: W, out: &CalibrateOutput) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["index", "split", "lpb"])?;
    for (i, (b, c)) in out.bounds.iter().zip(&out.in_calibration).enumerate() {
        w.write_record([
            i.to_string(),
            if *c { "calib" } else { "train" }.to_string(),
            b.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
