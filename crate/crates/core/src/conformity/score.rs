use std::sync::Arc;

use crate::calibrate::BetaGrid;
use crate::nuisance::ConditionalSurvivalModel;

/// A score `R(x, t)` in `[0, 1]`, nondecreasing in `t`, so that
/// `{t : R(x, t) >= beta}` is an interval `[L, inf)`.
pub trait NonConformityScore: Send + Sync {
    fn score(&self, x: &[f64], t: f64) -> f64;

    /// `inf{t >= 0 : score(x, t) >= beta}`, `f64::INFINITY` if the level is
    /// never reached. The default brackets by doubling and bisects.
    fn lower_bound(&self, x: &[f64], beta: f64) -> f64 {
        if self.score(x, 0.0) >= beta {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.score(x, hi) < beta {
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.score(x, mid) >= beta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Pseudo-quantile score: the largest grid level whose predicted quantile
/// does not exceed `t`.
#[derive(Debug, Clone)]
pub struct QuantileScore {
    model: Arc<dyn ConditionalSurvivalModel>,
    grid: BetaGrid,
}

impl QuantileScore {
    pub fn new(model: Arc<dyn ConditionalSurvivalModel>, grid: BetaGrid) -> Self {
        Self { model, grid }
    }

    pub fn model(&self) -> &Arc<dyn ConditionalSurvivalModel> {
        &self.model
    }

    pub fn grid(&self) -> &BetaGrid {
        &self.grid
    }

    /// Score from an already evaluated `S(t | x)`. Uses the same comparison
    /// as the curve quantile, so `score >= beta` iff `q(beta) <= t` exactly.
    pub fn score_from_survival(&self, s: f64) -> f64 {
        let g = self.grid.values();
        let count = g.partition_point(|&b| 1.0 - b >= 1.0 || s <= 1.0 - b);
        g[count.max(1) - 1]
    }
}

impl NonConformityScore for QuantileScore {
    fn score(&self, x: &[f64], t: f64) -> f64 {
        let s = self.model.predict_curve(x).evaluate(t);
        self.score_from_survival(s)
    }

    fn lower_bound(&self, x: &[f64], beta: f64) -> f64 {
        self.model.predict_curve(x).quantile_unchecked(beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::StepSurvivalCurve;

    #[derive(Debug)]
    struct Fixed(StepSurvivalCurve);
    impl ConditionalSurvivalModel for Fixed {
        fn predict_curve(&self, _x: &[f64]) -> StepSurvivalCurve {
            self.0.clone()
        }
    }

    fn score() -> QuantileScore {
        let c = StepSurvivalCurve::new(vec![2.0, 5.0], vec![0.5, 0.0]).unwrap();
        QuantileScore::new(Arc::new(Fixed(c)), BetaGrid::default())
    }

    #[test]
    fn hand_examples() {
        let s = score();
        assert_eq!(s.score(&[], 3.0), 0.5);
        assert_eq!(s.score(&[], 1.0), 0.0);
        assert_eq!(s.score(&[], 5.0), 1.0);
        assert_eq!(s.score(&[], 2.0), 0.5);
    }

    #[test]
    fn lower_bound_is_quantile() {
        let s = score();
        assert_eq!(s.lower_bound(&[], 0.0), 0.0);
        assert_eq!(s.lower_bound(&[], 0.3), 2.0);
        assert_eq!(s.lower_bound(&[], 0.5), 2.0);
        assert_eq!(s.lower_bound(&[], 0.501), 5.0);
    }

    #[derive(Debug)]
    struct Smooth;
    impl NonConformityScore for Smooth {
        fn score(&self, _x: &[f64], t: f64) -> f64 {
            1.0 - (-t).exp()
        }
    }

    #[test]
    fn default_lower_bound_bisects() {
        let l = Smooth.lower_bound(&[], 0.5);
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert_eq!(Smooth.lower_bound(&[], 0.0), 0.0);
        assert_eq!(Smooth.lower_bound(&[], 1.5), f64::INFINITY);
    }
}
