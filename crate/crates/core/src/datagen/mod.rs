//! Seeded generators for the three synthetic settings and their closed-form
//! conditional laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calibrate::{BetaGrid, LowerPredictiveBound};
use crate::conformity::{EtaFunction, NonConformityScore};
use crate::error::{Error, Result};
use crate::nuisance::{ConditionalSurvivalModel, PointSurvival, TargetKind};
use crate::survival::{FullRecord, StepSurvivalCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SettingSpec {
    /// `X ~ N(0,1)^2`, `T | X ~ Exp(rate e^{-X1+X2})`, `C ~ Exp(rate 1/3)`.
    One,
    /// `X ~ U[-1,1]^100`, log-normal `T` and `C` with medians 10 or 1000.
    Two,
    /// As `Two` with ten relevant covariates for `T`.
    Three,
}

impl SettingSpec {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            _ => Err(Error::InvalidInput(format!("unknown setting id {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Self::One => 2,
            Self::Two | Self::Three => 100,
        }
    }

    /// Log-scale mean of the log-normal law, settings 2 and 3.
    fn log_mean(self, target: TargetKind, x: &[f64]) -> f64 {
        let short = match (self, target) {
            (Self::Two, TargetKind::EventTime) => x[1] < 0.0 && x[2] > 0.0 && x[3] > 0.0,
            (Self::Two, TargetKind::CensoringTime) => x[0] < 0.0,
            (Self::Three, TargetKind::EventTime) => {
                x[..5].iter().all(|&v| v > 0.0) && x[5..10].iter().all(|&v| v < 0.0)
            }
            (Self::Three, TargetKind::CensoringTime) => x[0] > 0.0 && x[1] < 0.0,
            (Self::One, _) => unreachable!("setting 1 is exponential"),
        };
        if short {
            10f64.ln()
        } else {
            1000f64.ln()
        }
    }

    /// Exponential rate, setting 1.
    fn rate(self, target: TargetKind, x: &[f64]) -> f64 {
        match target {
            TargetKind::EventTime => (-x[0] + x[1]).exp(),
            TargetKind::CensoringTime => 1.0 / 3.0,
        }
    }
}

impl TryFrom<u8> for SettingSpec {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        Self::from_id(id)
    }
}

impl From<SettingSpec> for u8 {
    fn from(s: SettingSpec) -> u8 {
        s.id()
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// SplitMix64 finalizer applied to `master + (r + 1) * golden`, giving each
/// replication an independent seed regardless of scheduling.
pub fn derive_seed(master: u64, replication: u64) -> u64 {
    let mut z = master.wrapping_add(replication.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_time(setting: SettingSpec, target: TargetKind, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let t = match setting {
            SettingSpec::One => Exp::new(setting.rate(target, x))
                .expect("positive rate")
                .sample(rng),
            _ => {
                let z: f64 = StandardNormal.sample(rng);
                (setting.log_mean(target, x) + z).exp()
            }
        };
        if t > 0.0 && t.is_finite() {
            return t;
        }
    }
}

fn generate_inner(setting: SettingSpec, n: usize, seed: u64, censored: bool) -> Vec<FullRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = setting.dim();
    (0..n)
        .map(|_| {
            let covariates: Vec<f64> = match setting {
                SettingSpec::One => (0..d).map(|_| StandardNormal.sample(&mut rng)).collect(),
                _ => (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            };
            let event_time = draw_time(setting, TargetKind::EventTime, &covariates, &mut rng);
            let censor_time = draw_time(setting, TargetKind::CensoringTime, &covariates, &mut rng);
            FullRecord {
                covariates,
                event_time,
                censor_time: if censored { censor_time } else { f64::INFINITY },
            }
        })
        .collect()
}

/// `n` i.i.d. full records. Deterministic given `seed`.
pub fn generate(setting: SettingSpec, n: usize, seed: u64) -> Result<Vec<FullRecord>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    Ok(generate_inner(setting, n, seed, true))
}

/// Same draws as [`generate`] with every censoring time replaced by `+inf`.
pub fn generate_uncensored(setting: SettingSpec, n: usize, seed: u64) -> Result<Vec<FullRecord>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    Ok(generate_inner(setting, n, seed, false))
}

/// True conditional `beta`-quantile of `T | X = x`.
pub fn oracle_quantile(setting: SettingSpec, beta: f64, x: &[f64]) -> f64 {
    OracleLaw::new(setting, TargetKind::EventTime).quantile(x, beta)
}

/// Closed-form conditional law of `T | X` or `C | X`. Doubles as the
/// oracle score `1 - S(t | x)`, its `eta`, and the oracle bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleLaw {
    pub setting: SettingSpec,
    pub target: TargetKind,
}

impl OracleLaw {
    pub fn new(setting: SettingSpec, target: TargetKind) -> Self {
        Self { setting, target }
    }

    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self.setting {
            SettingSpec::One => (-self.setting.rate(self.target, x) * t).exp(),
            _ => normal_cdf(self.setting.log_mean(self.target, x) - t.ln()),
        }
    }

    pub fn quantile(&self, x: &[f64], beta: f64) -> f64 {
        if beta <= 0.0 {
            return 0.0;
        }
        if beta >= 1.0 {
            return f64::INFINITY;
        }
        match self.setting {
            SettingSpec::One => -(-beta).ln_1p() / self.setting.rate(self.target, x),
            _ => (self.setting.log_mean(self.target, x) + normal_quantile(beta)).exp(),
        }
    }

    /// Step curve taking value `1 - beta` from the true `beta`-quantile on,
    /// for every interior level of `grid`, so its grid quantiles are exact.
    pub fn curve(&self, x: &[f64], grid: &BetaGrid) -> StepSurvivalCurve {
        let g = grid.values();
        let inner = &g[1..g.len() - 1];
        let mut knots = Vec::with_capacity(inner.len());
        let mut values = Vec::with_capacity(inner.len());
        for &b in inner {
            let q = self.quantile(x, b);
            if !(q > 0.0 && q.is_finite()) || knots.last().is_some_and(|&k| q <= k) {
                continue;
            }
            knots.push(q);
            values.push(1.0 - b);
        }
        StepSurvivalCurve::new(knots, values).expect("quantiles increase")
    }
}

impl PointSurvival for OracleLaw {
    fn survival_at(&self, x: &[f64], t: f64) -> f64 {
        self.survival(x, t)
    }
}

impl NonConformityScore for OracleLaw {
    fn score(&self, x: &[f64], t: f64) -> f64 {
        1.0 - self.survival(x, t)
    }

    fn lower_bound(&self, x: &[f64], beta: f64) -> f64 {
        self.quantile(x, beta)
    }
}

impl EtaFunction for OracleLaw {
    fn eta(&self, beta: f64, u: f64, x: &[f64]) -> f64 {
        let q = self.quantile(x, beta);
        if q <= u {
            return 1.0;
        }
        let su = self.survival(x, u);
        if su <= 0.0 {
            return 0.0;
        }
        self.survival(x, q) / su
    }

    fn weighted_profile(&self, x: &[f64], times: &[f64], weights: &[f64], betas: &[f64]) -> Vec<f64> {
        let su: Vec<f64> = times.iter().map(|&u| self.survival(x, u)).collect();
        betas
            .iter()
            .map(|&b| {
                let q = self.quantile(x, b);
                let sq = self.survival(x, q);
                times
                    .iter()
                    .zip(&su)
                    .zip(weights)
                    .map(|((&u, &s), &w)| {
                        let e = if q <= u {
                            1.0
                        } else if s <= 0.0 {
                            0.0
                        } else {
                            sq / s
                        };
                        w * e
                    })
                    .sum()
            })
            .collect()
    }
}

/// Oracle bound `q*(beta | x)`.
#[derive(Debug, Clone, Copy)]
pub struct OracleBound {
    pub setting: SettingSpec,
    pub beta: f64,
}

impl LowerPredictiveBound for OracleBound {
    fn lower_bound(&self, x: &[f64]) -> f64 {
        oracle_quantile(self.setting, self.beta, x)
    }
}

/// [`OracleLaw::curve`] as a fitted-model stand-in.
#[derive(Debug, Clone)]
pub struct OracleCurveModel {
    pub law: OracleLaw,
    pub grid: BetaGrid,
}

impl ConditionalSurvivalModel for OracleCurveModel {
    fn predict_curve(&self, x: &[f64]) -> StepSurvivalCurve {
        self.law.curve(x, &self.grid)
    }
}
