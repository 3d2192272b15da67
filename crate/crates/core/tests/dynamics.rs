use std::f64::consts::PI;

use betarc::dynamics::{MapFamily, MapSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn any_map() -> impl Strategy<Value = MapSpec> {
    prop_oneof![
        (2u32..12).prop_map(|k| MapSpec::bernoulli(k).unwrap()),
        (0.01f64..=4.0).prop_map(|t| MapSpec::logistic(t).unwrap()),
        (0.01f64..0.99).prop_map(|t| MapSpec::piecewise_linear(t).unwrap()),
        (0.01f64..3.0).prop_map(|s| MapSpec::manneville_pomeau(s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn maps_keep_the_unit_interval(map in any_map(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            let x: f64 = rng.random();
            let y = map.apply(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&y), "{map}: T({x}) = {y}");
        }
        prop_assert!((0.0..=1.0).contains(&map.apply(0.0).unwrap()));
        prop_assert!((0.0..=1.0).contains(&map.apply(1.0).unwrap()));
    }

    #[test]
    fn orbits_are_deterministic(map in any_map(), u0 in 0.001f64..0.999) {
        let a = map.iterate(u0, 500);
        let b = map.iterate(u0, 500);
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                        b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn histogram_masses_sum_to_one(map in any_map(), u0 in 0.001f64..0.999, bins in 1usize..60) {
        let h = map.empirical_density(u0, 3000, bins).unwrap();
        prop_assert!(h.masses.iter().all(|m| *m >= 0.0));
        prop_assert!((h.masses.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn one_hundred_thousand_points_per_family() {
    let maps = [
        MapSpec::bernoulli(7).unwrap(),
        MapSpec::logistic(4.0).unwrap(),
        MapSpec::piecewise_linear(0.4).unwrap(),
        MapSpec::manneville_pomeau(0.75).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in maps {
        for _ in 0..100_000 {
            let y = m.apply(rng.random()).unwrap();
            assert!((0.0..=1.0).contains(&y));
        }
    }
}

#[test]
fn hand_evaluations() {
    assert!((MapSpec::bernoulli(3).unwrap().apply(0.1).unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(MapSpec::manneville_pomeau(1.0).unwrap().apply(0.5).unwrap(), 0.75);
    // second branch: 0.4 * (0.7 - 0.4) / 0.6
    assert!((MapSpec::piecewise_linear(0.4).unwrap().apply(0.7).unwrap() - 0.2).abs() < 1e-15);
    // first branch: 0.2 / 0.4
    assert!((MapSpec::piecewise_linear(0.4).unwrap().apply(0.2).unwrap() - 0.5).abs() < 1e-15);
    let o = MapSpec::bernoulli(3).unwrap().iterate(0.1, 3).values;
    for (a, b) in o.iter().zip([0.1, 0.3, 0.9]) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(MapSpec::logistic(4.5).is_err());
    assert!(MapSpec::bernoulli(1).is_err());
    assert!(MapSpec::logistic(2.0).unwrap().apply(1.5).is_err());
}

fn birkhoff_error(map: &MapSpec, u0: f64, n: usize) -> f64 {
    (map.birkhoff_average(u0, n, |x| x) - 0.5).abs()
}

#[test]
fn bernoulli_birkhoff_average_converges() {
    let m = MapSpec::bernoulli(3).unwrap();
    let errs: Vec<f64> = [1_000, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| birkhoff_error(&m, PI / 4.0, n))
        .collect();
    assert!(errs[3] < 1e-2, "{errs:?}");
    assert!(errs[3] <= errs[0], "{errs:?}");
    for (e, n) in errs.iter().zip([1e3, 1e4, 1e5, 1e6f64]) {
        assert!(*e <= 3.0 / n.sqrt(), "error {e} at n = {n}");
    }
    assert_eq!(m.birkhoff_average(0.37, 1, |x| x * x), 0.37 * 0.37);
}

#[test]
fn logistic_four_has_mean_one_half() {
    let m = MapSpec::logistic(4.0).unwrap();
    assert!(birkhoff_error(&m, 0.1234, 1_000_000) < 1e-2);
}

#[test]
fn bernoulli_histogram_is_uniform() {
    let h = MapSpec::bernoulli(3).unwrap().empirical_density(PI / 4.0, 100_000, 20).unwrap();
    for m in &h.masses {
        assert!((m - 0.05).abs() < 0.01, "{:?}", h.masses);
    }
}

#[test]
fn single_bin_single_point() {
    let h = MapSpec::logistic(3.0).unwrap().empirical_density(0.3, 1, 1).unwrap();
    assert_eq!(h.masses, vec![1.0]);
}

#[test]
fn logistic_period_two_after_burn_in() {
    let m = MapSpec::logistic(10.0 / 3.0).unwrap();
    let orbit = m.iterate(PI / 3.2, 3000).values;
    let mut distinct: Vec<f64> = Vec::new();
    for v in &orbit[1000..] {
        if !distinct.iter().any(|d| (d - v).abs() < 1e-9) {
            distinct.push(*v);
        }
    }
    assert_eq!(distinct.len(), 2, "{distinct:?}");
    // the 2-cycle of θx(1-x) solves θ²x² - θ(θ+1)x + θ + 1 = 0
    let t: f64 = 10.0 / 3.0;
    let disc = (t * t - 2.0 * t - 3.0).sqrt();
    let roots = [(t + 1.0 - disc) / (2.0 * t), (t + 1.0 + disc) / (2.0 * t)];
    distinct.sort_by(f64::total_cmp);
    for (d, r) in distinct.iter().zip(roots) {
        assert!((d - r).abs() < 1e-9);
    }
}

#[test]
fn manneville_pomeau_laminar_phases() {
    let orbit = MapSpec::manneville_pomeau(0.75).unwrap().iterate(PI / 4.0, 10_000).values;
    let mut longest = 0;
    let mut run = 0;
    for v in &orbit {
        run = if *v < 0.1 { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    assert!(longest >= 10, "longest laminar run {longest}");
    let h = MapSpec::manneville_pomeau(0.75).unwrap().empirical_density(PI / 4.0, 100_000, 10).unwrap();
    // the first bin holds more mass than any other
    assert!(h.masses[1..].iter().all(|m| *m < h.masses[0]), "{:?}", h.masses);
}

#[test]
fn invariant_densities() {
    assert_eq!(MapSpec::bernoulli(5).unwrap().invariant_density(0.37), Some(1.0));
    let l = MapSpec::logistic(4.0).unwrap();
    assert!((l.invariant_density(0.5).unwrap() - 2.0 / PI).abs() < 1e-15);
    assert_eq!(MapSpec::manneville_pomeau(0.75).unwrap().invariant_density(0.3), None);
    assert_eq!(MapSpec::logistic(3.7).unwrap().invariant_density(0.3), None);

    // long orbit histogram as the oracle for the arcsine law
    let h = l.empirical_density(0.1234, 1_000_000, 50).unwrap();
    let d = h.density();
    for (i, c) in h.centers().iter().enumerate().skip(5).take(40) {
        // bin average of the arcsine density: (2/π)(asin√b - asin√a) / width
        let (a, b) = (h.edges[i], h.edges[i + 1]);
        let exact = 2.0 / PI * (b.sqrt().asin() - a.sqrt().asin()) / (b - a);
        assert!((d[i] - exact).abs() < 0.05 * exact, "bin at {c}: {} vs {exact}", d[i]);
    }
}

#[test]
fn family_names_parse() {
    for f in MapFamily::ALL {
        assert_eq!(f.short_name().parse::<MapFamily>().unwrap(), f);
        assert_eq!(f.to_string().parse::<MapFamily>().unwrap(), f);
    }
    assert!("tent".parse::<MapFamily>().is_err());
}
