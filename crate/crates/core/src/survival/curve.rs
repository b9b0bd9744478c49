//! Step survival curves and cumulative hazards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower clamp applied to survival probabilities used as divisors or
/// logarithm arguments (`1 / s0` with `s0 = 20`).
pub const DEFAULT_POSITIVITY_FLOOR: f64 = 0.05;

/// Clamp a survival probability from below at `floor`.
#[inline]
pub fn clamp_survival(s: f64, floor: f64) -> f64 {
    s.max(floor)
}

/// Right-continuous, nonincreasing step function on `[0, inf)` with values in
/// `[0, 1]`. The curve equals 1 before the first knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvivalCurve {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepSurvivalCurve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "curve has {} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        let mut prev_t = 0.0;
        let mut prev_v = 1.0;
        for (&t, &v) in knots.iter().zip(&values) {
            if !(t.is_finite() && t > prev_t) {
                return Err(Error::InvalidInput(format!(
                    "curve knots must be positive, finite and strictly increasing (got {t} after {prev_t})"
                )));
            }
            if !(0.0..=1.0).contains(&v) || v > prev_v {
                return Err(Error::InvalidInput(format!(
                    "curve values must lie in [0, 1] and be nonincreasing (got {v} after {prev_v})"
                )));
            }
            prev_t = t;
            prev_v = v;
        }
        Ok(Self { knots, values })
    }

    /// Builds a curve from already validated parts. Callers in this crate
    /// guarantee the invariants.
    pub(crate) fn from_parts_unchecked(knots: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(knots.len(), values.len());
        debug_assert!(knots.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        Self { knots, values }
    }

    /// The curve identically equal to 1.
    pub fn constant_one() -> Self {
        Self {
            knots: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value of the flat tail past the last knot.
    pub fn tail_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    /// `S(t)`: value at the largest knot `<= t`, or 1 before the first knot.
    /// `S(+inf)` is the tail value.
    #[inline]
    pub fn evaluate(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Evaluates the curve at an ascending list of times in one merge pass.
    pub fn evaluate_sorted(&self, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut idx = 0;
        for &t in times {
            while idx < self.knots.len() && self.knots[idx] <= t {
                idx += 1;
            }
            out.push(if idx == 0 { 1.0 } else { self.values[idx - 1] });
        }
        out
    }

    /// `inf{t >= 0 : S(t) <= 1 - beta}`, or `f64::INFINITY` when the curve
    /// never reaches `1 - beta`.
    pub fn quantile(&self, beta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidInput(format!("quantile level {beta} outside [0, 1]")));
        }
        Ok(self.quantile_unchecked(beta))
    }

    #[inline]
    pub(crate) fn quantile_unchecked(&self, beta: f64) -> f64 {
        let level = 1.0 - beta;
        if level >= 1.0 {
            return 0.0;
        }
        let idx = self.values.partition_point(|&v| v > level);
        if idx == self.values.len() {
            f64::INFINITY
        } else {
            self.knots[idx]
        }
    }

    /// Quantiles at every level of an ascending list of levels in `[0, 1]`.
    pub fn quantiles_sorted(&self, betas: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(betas.len());
        let mut idx = 0;
        for &beta in betas {
            let level = 1.0 - beta;
            if level >= 1.0 {
                out.push(0.0);
                continue;
            }
            while idx < self.values.len() && self.values[idx] > level {
                idx += 1;
            }
            out.push(if idx == self.values.len() {
                f64::INFINITY
            } else {
                self.knots[idx]
            });
        }
        out
    }

    /// Point masses `(t_j, S(t_{j-1}) - S(t_j))` at every knot.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut prev = 1.0;
        self.knots.iter().zip(&self.values).map(move |(&t, &v)| {
            let mass = prev - v;
            prev = v;
            (t, mass)
        })
    }

    /// Converts to `Lambda(t) = -log S(t)`. Values are clamped at `floor` when
    /// given; otherwise a zero value is rejected.
    pub fn to_cumulative_hazard(&self, floor: Option<f64>) -> Result<CumulativeHazard> {
        let mut increments = Vec::with_capacity(self.knots.len());
        let mut prev = 0.0;
        for (&t, &v) in self.knots.iter().zip(&self.values) {
            let s = match floor {
                Some(f) => clamp_survival(v, f),
                None if v > 0.0 => v,
                None => return Err(Error::NonPositiveSurvival { knot: t, value: v }),
            };
            let lambda = -s.ln();
            increments.push((lambda - prev).max(0.0));
            prev = prev.max(lambda);
        }
        Ok(CumulativeHazard {
            knots: self.knots.clone(),
            increments,
        })
    }
}

/// Nondecreasing step cumulative hazard with `Lambda(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeHazard {
    knots: Vec<f64>,
    increments: Vec<f64>,
}

impl CumulativeHazard {
    pub fn new(knots: Vec<f64>, increments: Vec<f64>) -> Result<Self> {
        if knots.len() != increments.len() {
            return Err(Error::InvalidInput("knots and increments differ in length".into()));
        }
        if knots.iter().any(|t| !(t.is_finite() && *t > 0.0))
            || knots.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidInput(
                "hazard knots must be positive and strictly increasing".into(),
            ));
        }
        if increments.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidInput("hazard increments must be nonnegative".into()));
        }
        Ok(Self { knots, increments })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Cumulative values at each knot.
    pub fn cumulative(&self) -> Vec<f64> {
        self.increments
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        self.increments[..idx].iter().sum()
    }

    /// `exp(-scale * Lambda(t))` as a step curve.
    pub fn to_survival(&self, scale: f64) -> StepSurvivalCurve {
        let values = self
            .cumulative()
            .into_iter()
            .map(|l| (-l * scale).exp())
            .collect();
        StepSurvivalCurve::from_parts_unchecked(self.knots.clone(), values)
    }
}
