use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ascending candidate levels in `[0, 1]`, always containing both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BetaGrid {
    values: Vec<f64>,
}

impl BetaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&0.0) || values.last() != Some(&1.0) {
            return Err(Error::InvalidInput("grid must start at 0 and end at 1".into()));
        }
        if values.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::InvalidInput("grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `{j / m : j = 0..=m}` with `m = 1 / step`, which must be an integer.
    pub fn uniform(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::InvalidInput(format!("grid step {step} outside (0, 1]")));
        }
        let m = (1.0 / step).round();
        if (m * step - 1.0).abs() > 1e-9 || m > 1e8 {
            return Err(Error::InvalidInput(format!(
                "grid step {step} does not divide 1 into an integer number of steps"
            )));
        }
        let m = m as usize;
        Ok(Self {
            values: (0..=m).map(|j| j as f64 / m as f64).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for BetaGrid {
    fn default() -> Self {
        Self::uniform(0.001).expect("0.001 divides 1")
    }
}

impl TryFrom<Vec<f64>> for BetaGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BetaGrid> for Vec<f64> {
    fn from(g: BetaGrid) -> Self {
        g.values
    }
}
