use std::sync::Arc;

use censored_lpb::calibrate::{LPBModel, LowerPredictiveBound};
use censored_lpb::datagen::{generate, OracleLaw, SettingSpec};
use censored_lpb::evaluation::{aipcw_coverage_metric, ipcw_coverage_metric, oracle_coverage, or_coverage_metric};
use censored_lpb::nuisance::{cox_fit, ConditionalSurvivalModel, NewtonConfig, PointSurvival, TargetKind};
use censored_lpb::survival::{clamp_survival, Dataset};

/// With the true laws plugged in, both censored-data metrics estimate the
/// coverage the latent event times show directly.
#[test]
fn censored_metrics_agree_with_oracle_coverage_under_true_nuisances() {
    let n = 100_000;
    let beta_hat = 0.1;
    let law_t = OracleLaw::new(SettingSpec::One, TargetKind::EventTime);
    let law_c = OracleLaw::new(SettingSpec::One, TargetKind::CensoringTime);
    let full = generate(SettingSpec::One, n, 31).unwrap();
    let test = Dataset::from_full(2, &full).unwrap();
    let lpb = LPBModel::new(Arc::new(law_t), beta_hat);
    // Unclamped, the censoring weights e^{Y/3} give the augmentation term
    // infinite variance here, while the default floor of 0.05 clips enough
    // weight to bias the ratio. A small floor avoids both.
    let floor = 1e-3;

    let oracle = oracle_coverage(&full, &lpb).unwrap();
    let ipcw = ipcw_coverage_metric(&test, &lpb, &law_c, floor).unwrap();
    let aipcw = aipcw_coverage_metric(&test, &lpb, &law_t, &law_c, beta_hat, floor).unwrap();

    // Linearized standard error of the weighted ratio.
    let (mut num, mut den) = (0.0, 0.0);
    let terms: Vec<(f64, f64)> = test
        .iter()
        .map(|r| {
            let w = if r.event { 1.0 / clamp_survival(law_c.survival_at(&r.covariates, r.time), floor) } else { 0.0 };
            let hit = if lpb.covers(&r.covariates, r.time) { 1.0 } else { 0.0 };
            num += w * hit;
            den += w;
            (w, hit)
        })
        .collect();
    let p = num / den;
    let wbar = den / n as f64;
    let var = terms.iter().map(|(w, h)| (w * (h - p) / wbar).powi(2)).sum::<f64>() / n as f64;
    let se = (var / n as f64).sqrt();
    let oracle_se = (oracle * (1.0 - oracle) / n as f64).sqrt();
    let band = 3.0 * (se * se + oracle_se * oracle_se).sqrt();

    assert!((ipcw - oracle).abs() <= band, "ipcw {ipcw}, oracle {oracle}, band {band}");
    assert!((aipcw - oracle).abs() <= band, "aipcw {aipcw}, oracle {oracle}, band {band}");
}

#[test]
fn or_metric_is_the_nominal_level_up_to_one_curve_step() {
    let alpha = 0.1;
    let full = generate(SettingSpec::One, 1500, 17).unwrap();
    let train = Dataset::from_full(2, &full[..1000]).unwrap();
    let test = Dataset::from_full(2, &full[1000..]).unwrap();
    let model = cox_fit(&train, TargetKind::EventTime, &NewtonConfig::default()).unwrap();
    let metric = or_coverage_metric(&test, &model, alpha).unwrap();
    let mut widest = 0.0f64;
    for r in test.iter() {
        let curve = model.predict_curve(&r.covariates);
        let q = curve.quantile(alpha).unwrap();
        let s = curve.evaluate(q);
        let jump = curve.evaluate(q - 1e-12 * q.max(1.0)) - s;
        assert!(s <= 1.0 - alpha && s >= 1.0 - alpha - jump - 1e-15);
        widest = widest.max(jump);
    }
    assert!(metric <= 1.0 - alpha && metric >= 1.0 - alpha - widest, "{metric}");
}
