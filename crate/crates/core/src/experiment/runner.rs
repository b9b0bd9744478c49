use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EstimatorKind, EstimatorSpec, ExperimentConfig, MethodSpec};
use crate::baselines::{make_baseline_lpb, BaselineLpb, BaselineMethod, QrConfig};
use crate::calibrate::{calibrate, CalibrationConfig, LPBModel, LowerPredictiveBound, Nuisances};
use crate::conformity::{QuantileEta, QuantileScore};
use crate::datagen::{derive_seed, generate, generate_uncensored};
use crate::error::{Error, Result};
use crate::evaluation::{
    aipcw_coverage_metric, ipcw_coverage_metric, lpb_summary, oracle_coverage, or_coverage_metric,
    MetricKind,
};
use crate::nuisance::{
    cox_fit, default_knn_k, km_fit, knn_km_fit, ConditionalSurvivalModel, NewtonConfig, TargetKind,
};
use crate::survival::{random_partition, read_dataset_file, Dataset, FullRecord};

pub const RESULT_HEADER: [&str; 12] = [
    "replication",
    "setting",
    "method",
    "estimator",
    "metric",
    "alpha",
    "beta_hat",
    "coverage",
    "mean_lpb",
    "median_lpb",
    "n_test",
    "flag",
];

/// One line of the results CSV. Empty optional fields mean "not available".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub replication: usize,
    pub setting: String,
    pub method: String,
    pub estimator: String,
    pub metric: String,
    pub alpha: f64,
    pub beta_hat: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_lpb: Option<f64>,
    pub median_lpb: Option<f64>,
    pub n_test: usize,
    pub flag: String,
}

pub fn fit_estimator(
    kind: EstimatorKind,
    train: &Dataset,
    target: TargetKind,
    knn_k: Option<usize>,
) -> Result<Arc<dyn ConditionalSurvivalModel>> {
    Ok(match kind {
        EstimatorKind::Km => Arc::new(km_fit(train, target)?),
        EstimatorKind::Cox => Arc::new(cox_fit(train, target, &NewtonConfig::default())?),
        EstimatorKind::KnnKm => {
            let k = knn_k.unwrap_or_else(|| default_knn_k(train.len()));
            Arc::new(knn_km_fit(train, target, k)?)
        }
    })
}

struct Nuis {
    event: Arc<dyn ConditionalSurvivalModel>,
    censoring: Arc<dyn ConditionalSurvivalModel>,
    score: Arc<QuantileScore>,
    eta: QuantileEta,
}

fn fit_nuisances(spec: EstimatorSpec, train: &Dataset, cfg: &ExperimentConfig, cal: &CalibrationConfig) -> Result<Nuis> {
    let event = fit_estimator(spec.event, train, TargetKind::EventTime, cfg.knn_k)?;
    let censoring = fit_estimator(spec.censoring, train, TargetKind::CensoringTime, cfg.knn_k)?;
    Ok(Nuis {
        score: Arc::new(QuantileScore::new(event.clone(), cal.grid.clone())),
        eta: QuantileEta::new(event.clone(), cal.positivity_floor),
        event,
        censoring,
    })
}

struct Replication {
    train: Dataset,
    calib: Dataset,
    test: Dataset,
    test_full: Option<Vec<FullRecord>>,
}

fn replication_data(cfg: &ExperimentConfig, r: usize, csv: Option<&Dataset>) -> Result<Replication> {
    let seed = derive_seed(cfg.master_seed, r as u64);
    match csv {
        None => {
            let setting = cfg
                .setting_spec()?
                .ok_or_else(|| Error::Config("no data source".into()))?;
            let (a, b, c) = cfg.sizes(None)?;
            let full = if cfg.uncensored {
                generate_uncensored(setting, a + b + c, seed)?
            } else {
                generate(setting, a + b + c, seed)?
            };
            let d = setting.dim();
            Ok(Replication {
                train: Dataset::from_full(d, &full[..a])?,
                calib: Dataset::from_full(d, &full[a..a + b])?,
                test: Dataset::from_full(d, &full[a + b..])?,
                test_full: Some(full[a + b..].to_vec()),
            })
        }
        Some(data) => {
            let n = data.len();
            let (a, b, c) = cfg.sizes(Some(n))?;
            let parts = random_partition(n, &[a, b, c, n - a - b - c], seed)?;
            Ok(Replication {
                train: data.subset(&parts[0]),
                calib: data.subset(&parts[1]),
                test: data.subset(&parts[2]),
                test_full: None,
            })
        }
    }
}

struct RowFactory<'a> {
    replication: usize,
    setting: &'a str,
    alpha: f64,
    n_test: usize,
}

impl RowFactory<'_> {
    fn error(&self, method: &str, estimator: &str, metric: MetricKind, err: &Error) -> ResultRow {
        ResultRow {
            replication: self.replication,
            setting: self.setting.to_string(),
            method: method.to_string(),
            estimator: estimator.to_string(),
            metric: metric.to_string(),
            alpha: self.alpha,
            beta_hat: None,
            coverage: None,
            mean_lpb: None,
            median_lpb: None,
            n_test: self.n_test,
            flag: format!("error:{}", err.code()),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn ok(
        &self,
        method: &str,
        estimator: &str,
        metric: MetricKind,
        beta_hat: Option<f64>,
        coverage: Option<f64>,
        bounds: &[f64],
        flag: &str,
    ) -> ResultRow {
        let s = lpb_summary(bounds);
        let mut flags: Vec<&str> = Vec::new();
        if !flag.is_empty() {
            flags.push(flag);
        }
        if coverage.is_none() {
            flags.push("undefined_metric");
        }
        ResultRow {
            replication: self.replication,
            setting: self.setting.to_string(),
            method: method.to_string(),
            estimator: estimator.to_string(),
            metric: metric.to_string(),
            alpha: self.alpha,
            beta_hat,
            coverage,
            mean_lpb: s.mean,
            median_lpb: s.median,
            n_test: self.n_test,
            flag: flags.join(";"),
        }
    }
}

/// All result rows of replication `r`. Failures become error rows.
pub fn run_replication(cfg: &ExperimentConfig, r: usize, csv: Option<&Dataset>) -> Result<Vec<ResultRow>> {
    let cal = cfg.calibration_config()?;
    let methods = cfg.method_specs()?;
    let estimators = cfg.estimator_specs()?;
    let setting = match cfg.setting {
        Some(id) => id.to_string(),
        None => "csv".to_string(),
    };
    let oracle_mode = csv.is_none() && !cfg.censored_metrics;
    let calib_metrics: &[MetricKind] = if oracle_mode {
        &[MetricKind::Oracle]
    } else {
        &[MetricKind::Ipcw, MetricKind::Aipcw, MetricKind::Or]
    };

    let rep = match replication_data(cfg, r, csv) {
        Ok(rep) => rep,
        Err(e) => {
            let f = RowFactory {
                replication: r,
                setting: &setting,
                alpha: cfg.alpha,
                n_test: 0,
            };
            let mut rows = Vec::new();
            for m in &methods {
                for &metric in calib_metrics {
                    rows.push(f.error(m.name(), "", metric, &e));
                }
            }
            return Ok(rows);
        }
    };
    let f = RowFactory {
        replication: r,
        setting: &setting,
        alpha: cfg.alpha,
        n_test: rep.test.len(),
    };
    let xs: Vec<&[f64]> = rep.test.iter().map(|r| r.covariates.as_slice()).collect();
    let bounds_of = |lpb: &dyn LowerPredictiveBound| -> Vec<f64> { xs.iter().map(|x| lpb.lower_bound(x)).collect() };

    let nuisances: Vec<Result<Nuis>> = estimators
        .iter()
        .map(|&e| fit_nuisances(e, &rep.train, cfg, &cal))
        .collect();
    let mut baselines: HashMap<BaselineMethod, Result<BaselineLpb>> = HashMap::new();
    let mut rows = Vec::new();

    for &method in &methods {
        match method {
            MethodSpec::Calibrated(m) => {
                for (spec, nu) in estimators.iter().zip(&nuisances) {
                    let est = spec.to_string();
                    let nu = match nu {
                        Ok(nu) => nu,
                        Err(e) => {
                            rows.extend(calib_metrics.iter().map(|&k| f.error(m.as_str(), &est, k, e)));
                            continue;
                        }
                    };
                    let handles = Nuisances {
                        score: Some(nu.score.as_ref()),
                        censor_model: Some(&nu.censoring),
                        eta: Some(&nu.eta),
                        survival_model: Some(nu.event.as_ref()),
                    };
                    let res = match calibrate(&rep.calib, &handles, &cal, m) {
                        Ok(res) => res,
                        Err(e) => {
                            rows.extend(calib_metrics.iter().map(|&k| f.error(m.as_str(), &est, k, &e)));
                            continue;
                        }
                    };
                    let lpb = LPBModel::new(nu.score.clone(), res.beta_hat);
                    let bounds = bounds_of(&lpb);
                    for &metric in calib_metrics {
                        let cov = match metric {
                            MetricKind::Oracle => rep
                                .test_full
                                .as_deref()
                                .and_then(|t| oracle_coverage(t, &lpb).ok()),
                            MetricKind::Ipcw => ipcw_coverage_metric(
                                &rep.test,
                                &lpb,
                                &nu.censoring,
                                cal.positivity_floor,
                            ),
                            MetricKind::Aipcw => aipcw_coverage_metric(
                                &rep.test,
                                &lpb,
                                &nu.eta,
                                &nu.censoring,
                                res.beta_hat,
                                cal.positivity_floor,
                            ),
                            MetricKind::Or => or_coverage_metric(&rep.test, nu.event.as_ref(), res.beta_hat).ok(),
                        };
                        rows.push(f.ok(m.as_str(), &est, metric, Some(res.beta_hat), cov, &bounds, res.flag()));
                    }
                }
            }
            MethodSpec::Baseline(b) => {
                let fitted = baselines
                    .entry(b)
                    .or_insert_with(|| make_baseline_lpb(&rep.train, &rep.calib, b, cfg.alpha, &QrConfig::default()));
                let lpb = match fitted {
                    Ok(lpb) => lpb,
                    Err(e) => {
                        if oracle_mode {
                            rows.push(f.error(b.as_str(), "none", MetricKind::Oracle, e));
                        } else {
                            for spec in &estimators {
                                rows.push(f.error(b.as_str(), &spec.to_string(), MetricKind::Ipcw, e));
                            }
                        }
                        continue;
                    }
                };
                let bounds = bounds_of(lpb);
                if oracle_mode {
                    let cov = rep
                        .test_full
                        .as_deref()
                        .and_then(|t| oracle_coverage(t, lpb).ok());
                    rows.push(f.ok(b.as_str(), "none", MetricKind::Oracle, None, cov, &bounds, ""));
                } else {
                    for (spec, nu) in estimators.iter().zip(&nuisances) {
                        let est = spec.to_string();
                        match nu {
                            Ok(nu) => {
                                let cov = ipcw_coverage_metric(
                                    &rep.test,
                                    lpb,
                                    &nu.censoring,
                                    cal.positivity_floor,
                                );
                                rows.push(f.ok(b.as_str(), &est, MetricKind::Ipcw, None, cov, &bounds, ""));
                            }
                            Err(e) => rows.push(f.error(b.as_str(), &est, MetricKind::Ipcw, e)),
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Runs every replication, `threads` at a time (0 = all cores). Rows come
/// back in replication order whatever the scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let csv = cfg.input_csv.as_deref().map(read_dataset_file).transpose()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_rep: Vec<Result<Vec<ResultRow>>> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| run_replication(cfg, r, csv.as_ref()))
            .collect()
    });
    let mut rows = Vec::new();
    for rep in per_rep {
        rows.extend(rep?);
    }
    Ok(rows)
}

pub fn write_results<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RESULT_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
