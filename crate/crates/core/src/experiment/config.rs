use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineMethod;
use crate::calibrate::{BetaGrid, CalibrationConfig, Method};
use crate::datagen::SettingSpec;
use crate::error::{Error, Result};
use crate::survival::DEFAULT_POSITIVITY_FLOOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodSpec {
    Calibrated(Method),
    Baseline(BaselineMethod),
}

impl MethodSpec {
    pub fn name(self) -> &'static str {
        match self {
            Self::Calibrated(m) => m.as_str(),
            Self::Baseline(b) => b.as_str(),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse::<Method>()
            .map(Self::Calibrated)
            .or_else(|_| s.parse::<BaselineMethod>().map(Self::Baseline))
            .map_err(|_| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Km,
    Cox,
    KnnKm,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Km => "km",
            Self::Cox => "cox",
            Self::KnnKm => "knn_km",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "km" => Ok(Self::Km),
            "cox" => Ok(Self::Cox),
            "knn_km" | "knnkm" => Ok(Self::KnnKm),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Estimators for `T | X` and `C | X`, written `t` or `t:c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EstimatorSpec {
    pub event: EstimatorKind,
    pub censoring: EstimatorKind,
}

impl FromStr for EstimatorSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((t, c)) => Ok(Self {
                event: t.parse()?,
                censoring: c.parse()?,
            }),
            None => {
                let k = s.parse()?;
                Ok(Self {
                    event: k,
                    censoring: k,
                })
            }
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.event == self.censoring {
            f.write_str(self.event.as_str())
        } else {
            write!(f, "{}:{}", self.event.as_str(), self.censoring.as_str())
        }
    }
}

fn default_alpha() -> f64 {
    0.1
}
fn default_grid_step() -> f64 {
    0.001
}
fn default_estimators() -> Vec<String> {
    vec!["cox".into()]
}
fn default_replications() -> usize {
    1
}
fn default_floor() -> f64 {
    DEFAULT_POSITIVITY_FLOOR
}

/// JSON experiment description. Exactly one of `setting` and `input_csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub setting: Option<u8>,
    #[serde(default)]
    pub input_csv: Option<PathBuf>,
    /// Split sizes. Synthetic runs default to 1000 each; CSV runs default to
    /// equal thirds of the file.
    #[serde(default)]
    pub n_train: Option<usize>,
    #[serde(default)]
    pub n_calib: Option<usize>,
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    pub methods: Vec<String>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
    /// Neighbourhood size for `knn_km`; defaults to `max(50, ceil(0.2 n))`.
    #[serde(default)]
    pub knn_k: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Report IPCW/AIPCW/OR test metrics even when latent times are known.
    #[serde(default)]
    pub censored_metrics: bool,
    /// Synthetic only: draw every censoring time as `+inf`.
    #[serde(default)]
    pub uncensored: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn setting_spec(&self) -> Result<Option<SettingSpec>> {
        self.setting.map(SettingSpec::from_id).transpose()
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        self.methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                m.parse()
                    .map_err(|_| Error::Config(format!("methods[{i}]: unknown method `{m}`")))
            })
            .collect()
    }

    pub fn estimator_specs(&self) -> Result<Vec<EstimatorSpec>> {
        self.estimators
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.parse()
                    .map_err(|err| Error::Config(format!("estimators[{i}]: {err}")))
            })
            .collect()
    }

    pub fn calibration_config(&self) -> Result<CalibrationConfig> {
        CalibrationConfig::new(
            self.alpha,
            BetaGrid::uniform(self.grid_step).map_err(|e| Error::Config(format!("grid_step: {e}")))?,
            self.positivity_floor,
        )
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.setting, &self.input_csv) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `setting` or `input_csv`, not both".into()))
            }
            (None, None) => return Err(Error::Config("one of `setting` or `input_csv` is required".into())),
            _ => {}
        }
        self.setting_spec()
            .map_err(|e| Error::Config(format!("setting: {e}")))?;
        if self.uncensored && self.input_csv.is_some() {
            return Err(Error::Config("`uncensored` applies to synthetic settings only".into()));
        }
        for (name, v) in [("n_train", self.n_train), ("n_calib", self.n_calib), ("n_test", self.n_test)] {
            if v == Some(0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        self.method_specs()?;
        let est = self.estimator_specs()?;
        if est.is_empty() {
            return Err(Error::Config("estimators must be nonempty".into()));
        }
        if self.knn_k == Some(0) {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        self.calibration_config()?;
        Ok(())
    }

    /// `(n_train, n_calib, n_test)` for a dataset of `available` rows
    /// (`None` for synthetic runs).
    pub fn sizes(&self, available: Option<usize>) -> Result<(usize, usize, usize)> {
        match available {
            None => Ok((
                self.n_train.unwrap_or(1000),
                self.n_calib.unwrap_or(1000),
                self.n_test.unwrap_or(1000),
            )),
            Some(n) => {
                let third = n / 3;
                let s = (
                    self.n_train.unwrap_or(third),
                    self.n_calib.unwrap_or(third),
                    self.n_test.unwrap_or(third),
                );
                if s.0 == 0 || s.1 == 0 || s.2 == 0 {
                    return Err(Error::Config(format!("dataset of {n} rows is too small to split")));
                }
                if s.0 + s.1 + s.2 > n {
                    return Err(Error::Config(format!(
                        "split sizes {} + {} + {} exceed the {n} available rows",
                        s.0, s.1, s.2
                    )));
                }
                Ok(s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(r#"{"setting": 1, "methods": ["IPCW", "qr_y"]}"#).unwrap();
        assert_eq!(c.alpha, 0.1);
        assert_eq!(c.sizes(None).unwrap(), (1000, 1000, 1000));
        assert_eq!(
            c.method_specs().unwrap(),
            vec![
                MethodSpec::Calibrated(Method::Ipcw),
                MethodSpec::Baseline(BaselineMethod::QrY)
            ]
        );
    }

    #[test]
    fn estimator_syntax() {
        let e: EstimatorSpec = "knn_km:km".parse().unwrap();
        assert_eq!(e.event, EstimatorKind::KnnKm);
        assert_eq!(e.censoring, EstimatorKind::Km);
        assert_eq!(e.to_string(), "knn_km:km");
        assert_eq!("cox".parse::<EstimatorSpec>().unwrap().to_string(), "cox");
        assert!("rsf".parse::<EstimatorSpec>().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"methods": ["IPCW"]}"#,
            r#"{"setting": 1, "methods": []}"#,
            r#"{"setting": 4, "methods": ["IPCW"]}"#,
            r#"{"setting": 1, "methods": ["IPCW"], "grid_step": 0.3}"#,
            r#"{"setting": 1, "methods": ["nope"]}"#,
            r#"{"setting": 1, "methods": ["IPCW"], "n_train": 0}"#,
            r#"{"setting": 1, "methods": ["IPCW"], "bogus": 1}"#,
            r#"{"setting": 1, "methods": ["IPCW"], "alpha": 1.5}"#,
        ] {
            let err = ExperimentConfig::from_json(bad).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn csv_sizes() {
        let c = ExperimentConfig::from_json(r#"{"input_csv": "x.csv", "methods": ["IPCW"]}"#).unwrap();
        assert_eq!(c.sizes(Some(10)).unwrap(), (3, 3, 3));
        assert!(c.sizes(Some(2)).is_err());
    }
}
