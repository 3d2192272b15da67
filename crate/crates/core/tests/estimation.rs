use std::f64::consts::PI;

use betarc::dynamics::MapFamily;
use betarc::estimation::{
    fit, fit_u0_grid, information_criteria, loglik, Bounds, FitOptions, U0_MAX, U0_MIN,
};
use betarc::model::{simulate, LinkFn, ModelSpec, ParamVector, SeriesSample};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::oracle;

fn random_case(seed: u64) -> (ModelSpec, ParamVector, Vec<f64>, Option<Vec<Vec<f64>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (map, theta) = match rng.random_range(0..4) {
        0 => (MapFamily::Bernoulli, rng.random_range(2..8) as f64),
        1 => (MapFamily::Logistic, rng.random_range(0.5..4.0)),
        2 => (MapFamily::PiecewiseLinear, rng.random_range(0.05..0.95)),
        _ => (MapFamily::MannevillePomeau, rng.random_range(0.05..0.95)),
    };
    let links = [LinkFn::Identity, LinkFn::Logit, LinkFn::Cloglog];
    let (p, l) = (rng.random_range(0..3), rng.random_range(0..3));
    let g = links[rng.random_range(1..3)];
    let h = links[rng.random_range(0..3)];
    let spec = ModelSpec::barc(map, p, l, g, h);
    let gamma = ParamVector {
        nu: 10f64.powf(rng.random_range(0.0..2.5)),
        alpha: rng.random_range(-0.5..0.5),
        beta: (0..l).map(|_| rng.random_range(-0.5..0.5)).collect(),
        phi: (0..p).map(|_| rng.random_range(-0.5..0.5)).collect(),
        theta,
        u0: rng.random_range(0.01..0.99),
    };
    let n = rng.random_range(5..80);
    let y = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
    let x = (l > 0).then(|| (0..n).map(|_| (0..l).map(|_| rng.random_range(-1.0..1.0)).collect()).collect());
    (spec, gamma, y, x)
}

#[test]
fn loglik_matches_term_by_term_oracle() {
    for seed in 0..100 {
        let (spec, gamma, y, x) = random_case(seed);
        let sample = SeriesSample::with_covariates(y.clone(), x.clone()).unwrap();
        let got = loglik(&spec, &gamma, &sample).unwrap();
        let want = oracle::loglik(&spec, &gamma, &y, x.as_deref());
        assert!((got - want).abs() <= 1e-10, "case {seed}: {got} vs {want}");
    }
}

#[test]
fn five_point_bernoulli_sum() {
    let spec = ModelSpec::pure_chaotic(MapFamily::Bernoulli);
    let gamma = ParamVector::pure(40.0, 3.0, 0.2 + PI / 100.0);
    let y = vec![0.21, 0.69, 0.1, 0.33, 0.97];
    let got = loglik(&spec, &gamma, &SeriesSample::new(y.clone()).unwrap()).unwrap();
    let mut want = 0.0;
    let mut z: f64 = 0.2 + PI / 100.0;
    for v in &y {
        want += oracle::log_beta_density(z, 40.0, *v);
        z = (3.0 * z).fract();
    }
    assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariate_order_is_irrelevant(seed in any::<u64>(), swap in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::barc(MapFamily::MannevillePomeau, 1, 3, LinkFn::Logit, LinkFn::Identity);
        let gamma = ParamVector {
            nu: 25.0,
            alpha: -0.2,
            beta: vec![0.3, -0.1, 0.05],
            phi: vec![0.2],
            theta: 0.4,
            u0: rng.random_range(0.01..0.99),
        };
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(0.05..0.95)).collect();
        let a = loglik(&spec, &gamma, &SeriesSample::with_covariates(y.clone(), Some(x.clone())).unwrap()).unwrap();

        let perm = [[1, 0, 2], [2, 1, 0], [1, 2, 0]][swap];
        let xp: Vec<Vec<f64>> = x.iter().map(|r| perm.iter().map(|&i| r[i]).collect()).collect();
        let mut gp = gamma.clone();
        gp.beta = perm.iter().map(|&i| gamma.beta[i]).collect();
        let b = loglik(&spec, &gp, &SeriesSample::with_covariates(y, Some(xp)).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
    }
}

#[test]
fn information_criteria_examples() {
    let (aic, bic) = information_criteria(120.01, 4, 190);
    assert!((aic + 232.02).abs() <= 0.02 && (bic + 219.03).abs() <= 0.02);
    assert!((aic + 232.03).abs() <= 0.011 && (bic + 219.04).abs() <= 0.011);
    assert!((information_criteria(134.70, 4, 190).0 + 261.40).abs() <= 0.02);
    assert!((information_criteria(0.0, 1, 3).1 - 3f64.ln()).abs() < 1e-15);
    assert_eq!(information_criteria(0.0, 1, 1).1, 0.0);
}

fn model_two_like() -> (ModelSpec, ParamVector) {
    let spec = ModelSpec::barc(MapFamily::MannevillePomeau, 1, 0, LinkFn::Logit, LinkFn::Identity);
    let gamma = ParamVector {
        nu: 30.0,
        alpha: -0.6,
        beta: vec![],
        phi: vec![0.4],
        theta: 0.4,
        u0: 0.37,
    };
    (spec, gamma)
}

#[test]
fn maximizer_dominates_the_truth() {
    let (spec, truth) = model_two_like();
    let path = simulate(&spec, &truth, 300, &mut ChaCha8Rng::seed_from_u64(12), None).unwrap();
    // the likelihood is rough in the map parameter, so it is held at the truth
    let opts = FitOptions {
        u0: Some(truth.u0),
        initial: Some(truth.clone()),
        free: Some(vec![true, true, true, false]),
        wald: false,
        ..FitOptions::default()
    };
    let f = fit(&spec, &path.sample, &opts).unwrap();
    let at_truth = loglik(&spec, &truth, &path.sample).unwrap();
    assert!(f.loglik >= at_truth - 1e-6, "{} < {at_truth}", f.loglik);

    let best = f.starts.iter().map(|s| s.loglik).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(f.loglik, best);
    assert_eq!(f.starts.iter().map(|s| s.nu_start).collect::<Vec<_>>(), vec![5.0, 50.0, 100.0]);
    assert_eq!(f.k, 3);
    assert!(Bounds::default_for(&spec, truth.theta).contains(&f.gamma_hat.to_flat()));
    let (aic, bic) = information_criteria(f.loglik, 3, 300);
    assert_eq!((f.aic, f.bic), (aic, bic));
}

#[test]
fn two_stage_reaches_at_least_the_truth() {
    let (spec, truth) = model_two_like();
    let path = simulate(&spec, &truth, 200, &mut ChaCha8Rng::seed_from_u64(31), None).unwrap();
    let opts = FitOptions {
        initial: Some(truth.clone()),
        free: Some(vec![true, true, true, false]),
        two_stage: true,
        ..FitOptions::default()
    };
    let f = fit(&spec, &path.sample, &opts).unwrap();
    assert!(f.loglik >= loglik(&spec, &truth, &path.sample).unwrap() - 1e-6);
    let wald = f.wald.unwrap();
    assert_eq!(wald.names, vec!["nu", "alpha", "phi1"]);
    assert!(wald.p_values.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
}

#[test]
fn single_point_grid_is_a_fixed_u0_fit() {
    let (spec, truth) = model_two_like();
    let path = simulate(&spec, &truth, 150, &mut ChaCha8Rng::seed_from_u64(5), None).unwrap();
    let opts = FitOptions {
        wald: false,
        ..FitOptions::default()
    };
    let grid = fit_u0_grid(&spec, &path.sample, &opts, 1).unwrap();
    let fixed = fit(&spec, &path.sample, &FitOptions { u0: Some(U0_MIN), ..opts }).unwrap();
    assert_eq!(grid.gamma_hat, fixed.gamma_hat);
    assert_eq!(grid.loglik, fixed.loglik);
    assert_eq!(grid.u0_grid_trace.unwrap(), vec![(U0_MIN, fixed.loglik)]);
}

#[test]
fn mirrored_seeds_are_not_identified() {
    // T(u) = T(1 - u) for the logistic map, and y_1 = 1/2 makes the first
    // term symmetric too, so u0 and 1 - u0 give the same likelihood
    let spec = ModelSpec::pure_chaotic(MapFamily::Logistic);
    let truth = ParamVector::pure(50.0, 3.9, 0.3);
    let mut path = simulate(&spec, &truth, 40, &mut ChaCha8Rng::seed_from_u64(2), None).unwrap();
    path.sample.y[0] = 0.5;
    let mut opts = FitOptions::nu_only(&spec, &truth);
    opts.wald = false;
    let f = fit_u0_grid(&spec, &path.sample, &opts, 900).unwrap();
    let trace = f.u0_grid_trace.unwrap();
    assert_eq!(trace.len(), 900);
    assert_eq!(trace[0].0, U0_MIN);
    assert!((trace[899].0 - U0_MAX).abs() < 1e-15);
    let near = trace.iter().filter(|(_, l)| *l >= f.loglik - 0.1).count();
    assert!(near >= 2, "{near}");
    let best = trace.iter().position(|(_, l)| *l == f.loglik).unwrap();
    assert!((trace[899 - best].1 - f.loglik).abs() < 1e-4);
}

#[test]
fn wald_intervals_cover_the_precision() {
    let spec = ModelSpec::pure_chaotic(MapFamily::Bernoulli);
    let truth = ParamVector::pure(40.0, 3.0, 0.2 + PI / 100.0);
    let reps = 200;
    let mut covered = 0;
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + r);
        let path = simulate(&spec, &truth, 5000, &mut rng, None).unwrap();
        let f = fit(&spec, &path.sample, &FitOptions::nu_only(&spec, &truth)).unwrap();
        let se = f.se()[0].expect("curvature in nu");
        if (f.gamma_hat.nu - 40.0).abs() <= 1.959_963_984_540_054 * se {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    assert!((0.91..=0.99).contains(&rate), "coverage {rate}");
}

#[test]
fn default_bounds() {
    let spec = ModelSpec::barc(MapFamily::MannevillePomeau, 1, 1, LinkFn::Cloglog, LinkFn::Identity);
    let b = Bounds::default_for(&spec, 0.4);
    assert_eq!(b.lower[0], 1e-3);
    assert_eq!(b.upper[0], 1e4);
    assert_eq!(&b.lower[1..4], &[-50.0; 3]);
    assert_eq!(&b.upper[1..4], &[50.0; 3]);
    assert!(b.lower[4] > 0.0 && b.upper[4] < 1.0);
    assert_eq!(b.u0, (PI / 1000.0, 1.0 - PI / 1000.0));
    assert!(b.lower.iter().zip(&b.upper).skip(1).all(|(l, u)| l < u));

    // the discrete Bernoulli k is pinned
    let bern = Bounds::default_for(&ModelSpec::pure_chaotic(MapFamily::Bernoulli), 5.0);
    assert_eq!((bern.lower[2], bern.upper[2]), (5.0, 5.0));
}

#[test]
fn invalid_inputs_are_rejected() {
    let spec = ModelSpec::pure_chaotic(MapFamily::Bernoulli);
    let truth = ParamVector::pure(40.0, 3.0, 0.3);
    let sample = SeriesSample::new(vec![0.3, 0.4, 0.5]).unwrap();
    assert!(fit_u0_grid(&spec, &sample, &FitOptions::nu_only(&spec, &truth), 0).is_err());
    assert!(loglik(&spec, &ParamVector::pure(-1.0, 3.0, 0.3), &sample).is_err());
    let with_x = ModelSpec::barc(MapFamily::Logistic, 0, 1, LinkFn::Logit, LinkFn::Logit);
    assert!(loglik(&with_x, &ParamVector { beta: vec![0.1], ..ParamVector::pure(5.0, 3.5, 0.3) }, &sample).is_err());
}
