use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use censored_lpb::datagen::{generate, SettingSpec};
use censored_lpb::nuisance::{
    cox_fit, cox_fit_traced, km_fit, knn_km_fit, ConditionalSurvivalModel, NewtonConfig, TargetKind,
};
use censored_lpb::survival::{Dataset, ObservedRecord};

#[test]
fn cox_recovers_setting_one_coefficients() {
    for seed in [1, 2, 3] {
        let full = generate(SettingSpec::One, 2000, seed).unwrap();
        let data = Dataset::from_full(2, &full).unwrap();
        let model = cox_fit(&data, TargetKind::EventTime, &NewtonConfig::default()).unwrap();
        let b = &model.coefficients;
        assert!((b[0] + 1.0).abs() <= 0.15, "seed {seed}: {b:?}");
        assert!((b[1] - 1.0).abs() <= 0.15, "seed {seed}: {b:?}");
    }
}

#[test]
fn cox_null_binary_covariate_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t_law = Exp::new(1.0).unwrap();
    let c_law = Exp::new(0.5).unwrap();
    let records = (0..2000)
        .map(|i| {
            let t: f64 = t_law.sample(&mut rng);
            let c: f64 = c_law.sample(&mut rng);
            ObservedRecord::new(vec![(i % 2) as f64], t.min(c), t <= c).unwrap()
        })
        .collect();
    let data = Dataset::new(1, records).unwrap();
    let model = cox_fit(&data, TargetKind::EventTime, &NewtonConfig::default()).unwrap();
    assert!(model.coefficients[0].abs() <= 0.1, "{:?}", model.coefficients);
}

#[test]
fn cox_newton_ascent_is_monotone() {
    for setting in [SettingSpec::One, SettingSpec::Two] {
        let full = generate(setting, 600, 5).unwrap();
        let data = Dataset::from_full(setting.dim(), &full).unwrap();
        for target in [TargetKind::EventTime, TargetKind::CensoringTime] {
            let (_, trace) = cox_fit_traced(&data, target, &NewtonConfig::default()).unwrap();
            assert!(trace.len() >= 2);
            // Near the optimum the sum over risk sets only resolves changes
            // above its own rounding.
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-13 * w[0].abs(), "{setting:?} {target:?}: {trace:?}");
            }
        }
    }
}

#[test]
fn cox_curves_are_monotone_in_time() {
    let full = generate(SettingSpec::One, 500, 8).unwrap();
    let data = Dataset::from_full(2, &full).unwrap();
    let model = cox_fit(&data, TargetKind::EventTime, &NewtonConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let curve = model.predict_curve(&x);
        let mut prev = 1.0;
        for i in 0..200 {
            let s = curve.evaluate(i as f64 * 0.05);
            assert!(s <= prev && (0.0..=1.0).contains(&s));
            prev = s;
        }
    }
}

/// Two far-apart clusters with different rates: with `k` equal to the
/// cluster size the neighbourhood is exactly the query's cluster.
#[test]
fn knn_km_isolates_a_cluster() {
    let n = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut records = Vec::new();
    let mut cluster_a = Vec::new();
    for i in 0..2 * n {
        let in_a = i % 2 == 0;
        let centre = if in_a { 0.0 } else { 50.0 };
        let rate = if in_a { 1.0 } else { 5.0 };
        let x = vec![centre + rng.random_range(-1.0..1.0), centre + rng.random_range(-1.0..1.0)];
        let t = Exp::new(rate).unwrap().sample(&mut rng);
        let r = ObservedRecord::new(x, t, true).unwrap();
        if in_a {
            cluster_a.push(r.clone());
        }
        records.push(r);
    }
    let data = Dataset::new(2, records).unwrap();
    let knn = knn_km_fit(&data, TargetKind::EventTime, n).unwrap();
    let a_only = km_fit(&Dataset::new(2, cluster_a).unwrap(), TargetKind::EventTime).unwrap();
    let curve = knn.predict_curve(&[0.0, 0.0]);
    assert_eq!(&curve, a_only.curve());

    // Uncensored KM against the true exponential law, DKW band at level 1e-3.
    let band = ((2.0f64 / 1e-3).ln() / (2.0 * n as f64)).sqrt();
    for i in 0..400 {
        let t = i as f64 * 0.01;
        assert!((curve.evaluate(t) - (-t).exp()).abs() <= band, "t = {t}");
    }
}
