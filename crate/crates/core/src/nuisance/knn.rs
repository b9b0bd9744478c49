use std::cmp::Ordering;

use super::{product_limit, ConditionalSurvivalModel, TargetKind};
use crate::error::{Error, Result};
use crate::survival::{Dataset, StepSurvivalCurve};

/// `max(50, ceil(0.2 n))`, capped at `n`.
pub fn default_knn_k(n: usize) -> usize {
    let k = ((0.2 * n as f64).ceil() as usize).max(50);
    k.min(n)
}

/// Kaplan-Meier over the `k` nearest training records in standardized
/// covariate space. Distance ties are broken by training index.
#[derive(Debug, Clone)]
pub struct KnnKaplanMeier {
    k: usize,
    means: Vec<f64>,
    scales: Vec<f64>,
    points: Vec<Vec<f64>>,
    outcomes: Vec<(f64, bool)>,
}

impl KnnKaplanMeier {
    pub fn k(&self) -> usize {
        self.k
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Training indices of the `k` nearest neighbours of `x`, ascending by
    /// `(distance, index)`.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let z = self.standardize(x);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }
}

impl ConditionalSurvivalModel for KnnKaplanMeier {
    fn predict_curve(&self, x: &[f64]) -> StepSurvivalCurve {
        let mut local: Vec<(f64, bool)> = if self.k == self.outcomes.len() {
            self.outcomes.clone()
        } else {
            self.neighbours(x)
                .into_iter()
                .map(|i| self.outcomes[i])
                .collect()
        };
        product_limit(&mut local)
    }
}

pub fn knn_km_fit(data: &Dataset, target: TargetKind, k: usize) -> Result<KnnKaplanMeier> {
    let n = data.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "k = {k} must lie in 1..={n} (training size)"
        )));
    }
    let d = data.dim();
    let mut means = vec![0.0; d];
    for r in data.iter() {
        for (m, v) in means.iter_mut().zip(&r.covariates) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut scales = vec![0.0; d];
    for r in data.iter() {
        for ((s, v), m) in scales.iter_mut().zip(&r.covariates).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in scales.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s == 0.0 || !s.is_finite() {
            *s = 1.0;
        }
    }
    let points = data
        .iter()
        .map(|r| {
            r.covariates
                .iter()
                .zip(&means)
                .zip(&scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();
    let outcomes = data.iter().map(|r| (r.time, target.indicator(r))).collect();
    Ok(KnnKaplanMeier {
        k,
        means,
        scales,
        points,
        outcomes,
    })
}
