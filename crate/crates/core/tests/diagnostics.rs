use betarc::diagnostics::{accuracy, forecast, ljung_box, model_select, Candidate, Horizon};
use betarc::dynamics::MapFamily;
use betarc::estimation::{fit, FitOptions};
use betarc::model::{conditional_means, simulate, LinkFn, ModelSpec, ParamVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

proptest! {
    #[test]
    fn accuracy_is_translation_consistent(
        pairs in prop::collection::vec((0.05f64..0.95, 0.05f64..0.95), 1..50),
        delta in 0.0f64..5.0,
    ) {
        let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = accuracy(&a, &p, Horizon::InSample).unwrap();
        let a2: Vec<f64> = a.iter().map(|v| v + delta).collect();
        let p2: Vec<f64> = p.iter().map(|v| v + delta).collect();
        let s = accuracy(&a2, &p2, Horizon::InSample).unwrap();
        prop_assert!((r.me - s.me).abs() < 1e-12);
        prop_assert!((r.mae - s.mae).abs() < 1e-12);
        prop_assert!((r.rmse - s.rmse).abs() < 1e-12);
        prop_assert!(r.rmse >= r.me.abs() - 1e-15);
        prop_assert!(r.rmse >= r.mae - 1e-15);
        prop_assert!(r.mae >= r.me.abs() - 1e-15);
    }

    #[test]
    fn ljung_box_ignores_sign(seed in any::<u64>(), m in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = noise(&mut rng, 60);
        let flipped: Vec<f64> = e.iter().map(|v| -v).collect();
        let a = ljung_box(&e, m).unwrap();
        let b = ljung_box(&flipped, m).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-12 * a.statistic.max(1.0));
        prop_assert!(a.statistic >= 0.0);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        prop_assert_eq!(a.dof, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forecast_continues_the_orbit(
        family in prop_oneof![
            Just((MapFamily::Bernoulli, 3.0)),
            Just((MapFamily::Logistic, 3.8)),
            Just((MapFamily::PiecewiseLinear, 0.4)),
            Just((MapFamily::MannevillePomeau, 0.6)),
        ],
        u0 in 0.01f64..0.99,
        h in 1usize..10,
        seed in any::<u64>(),
    ) {
        let (map, theta) = family;
        let spec = ModelSpec::pure_chaotic(map);
        let truth = ParamVector::pure(30.0, theta, u0);
        let path = simulate(&spec, &truth, 40 + h, &mut ChaCha8Rng::seed_from_u64(seed), None).unwrap();
        let (train, _) = path.sample.split_last(h).unwrap();
        let mut opts = FitOptions::nu_only(&spec, &truth);
        opts.wald = false;
        let f = fit(&spec, &train, &opts).unwrap();
        let ahead = forecast(&spec, &f, &train, h, None).unwrap();
        let mut gamma = f.gamma_hat.clone();
        gamma.nu = 1.0;
        let all = conditional_means(&spec, &gamma, &path.sample).unwrap();
        for (a, b) in f.fitted.iter().chain(&ahead).zip(&all) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn ljung_box_null_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let reps = 10_000;
    let rejections = (0..reps)
        .filter(|_| ljung_box(&noise(&mut rng, 190), 20).unwrap().p_value < 0.05)
        .count();
    let rate = rejections as f64 / reps as f64;
    assert!((0.03..=0.07).contains(&rate), "{rate}");
}

#[test]
fn ljung_box_detects_autoregression() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    // power is close to 0.993, so 1e3 replicates would sit within noise of the bar
    let reps = 10_000;
    let mut hits = 0;
    for _ in 0..reps {
        let e = noise(&mut rng, 190);
        let mut x = vec![e[0] / 0.75f64.sqrt()];
        for t in 1..190 {
            x.push(0.5 * x[t - 1] + e[t]);
        }
        if ljung_box(&x, 20).unwrap().p_value < 0.01 {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.99 * reps as f64, "{hits}");
}

#[test]
fn selection_on_real_fits() {
    let spec = ModelSpec::barc(MapFamily::MannevillePomeau, 1, 0, LinkFn::Logit, LinkFn::Identity);
    let truth = ParamVector {
        nu: 60.0,
        alpha: -0.5,
        beta: vec![],
        phi: vec![0.5],
        theta: 0.4,
        u0: 0.37,
    };
    let path = simulate(&spec, &truth, 400, &mut ChaCha8Rng::seed_from_u64(40), None).unwrap();
    let (train, test) = path.sample.split_last(6).unwrap();
    let mut candidates = Vec::new();
    for p in [0usize, 1] {
        let s = ModelSpec::barc(MapFamily::MannevillePomeau, p, 0, LinkFn::Logit, LinkFn::Identity);
        let mut initial = truth.clone();
        initial.phi.truncate(p);
        let mut free = vec![true; s.dim()];
        free[s.dim() - 1] = false;
        let opts = FitOptions {
            initial: Some(initial),
            u0: Some(truth.u0),
            free: Some(free),
            ..FitOptions::default()
        };
        let f = fit(&s, &train, &opts).unwrap();
        let accuracy_in = accuracy(&train.y, &f.fitted, Horizon::InSample).unwrap();
        let lb = ljung_box(&f.residuals, 20).unwrap();
        let ahead = forecast(&s, &f, &train, 6, None).unwrap();
        let out = accuracy(&test.y, &ahead, Horizon::OutOfSample).unwrap();
        assert_eq!(out.horizon, Horizon::OutOfSample);
        assert!(out.mae.is_finite());
        candidates.push(Candidate { fit: f, accuracy_in, ljung_box: lb });
    }
    assert!(candidates[1].fit.loglik > candidates[0].fit.loglik);
    let sel = model_select(&candidates).unwrap();
    assert_eq!(sel.best_by_loglik, 1);
    assert!(sel.admissible >= 1);
}

#[test]
fn accuracy_examples() {
    let r = accuracy(&[0.5, 0.5], &[0.4, 0.6], Horizon::InSample).unwrap();
    assert!((r.mae - 0.1).abs() < 1e-15 && (r.rmse - 0.1).abs() < 1e-15);
    assert!((r.mape - 20.0).abs() < 1e-12 && r.mpe.abs() < 1e-12 && r.me.abs() < 1e-15);
    let z = accuracy(&[0.3, 0.7], &[0.3, 0.7], Horizon::OutOfSample).unwrap();
    assert_eq!((z.me, z.mae, z.rmse, z.mpe, z.mape), (0.0, 0.0, 0.0, 0.0, 0.0));
    assert!(accuracy(&[0.0], &[0.1], Horizon::InSample).is_err());
    assert!(ljung_box(&[0.2; 30], 5).is_err());
    assert!(ljung_box(&[0.1, 0.2, 0.3], 3).is_err());
}
