mod common;

use common::checks;
use gofinv::forward::forward_on_grid;
use gofinv::metrics::{c_u, d_g, delta_n, hellinger, hellinger_normalized, l2_mu_norm, l2_norm, sobolev_norm};
use gofinv::{DensitySpec, GridFunction, GridSpec, OdeModel, RateSchedule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest `‖G(θ₁)(x) − G(θ₂)(x)‖₂ / 2` over the nodes, the tightest admissible envelope.
fn half_max_gap(model: &OdeModel, a: &GridFunction, b: &GridFunction) -> f64 {
    let (ga, gb) = (forward_on_grid(model, a).unwrap(), forward_on_grid(model, b).unwrap());
    let dy = common::OBS_TIMES.len();
    ga.chunks(dy)
        .zip(gb.chunks(dy))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
        / 2.0
}

#[test]
fn sandwich_with_tight_envelope() {
    let grid = common::grid(17);
    let model = common::model();
    let prior = common::prior(&grid, 2.0, 4);
    let density = DensitySpec::uniform(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..200 {
        let a = checks::random_cpm(&prior, &mut rng);
        let b = checks::random_cpm(&prior, &mut rng);
        let dg = d_g(&model, &a, &b, &density).unwrap();
        let h = hellinger(&model, &a, &b, 1.0, &density).unwrap();
        let u = half_max_gap(&model, &a, &b);
        assert!(c_u(u).unwrap().sqrt() * dg <= h + 1e-12, "lower: {dg} {h} {u}");
        assert!(h <= dg / 2.0 + 1e-12, "upper: {dg} {h}");
    }
}

#[test]
fn sandwich_with_sweep_envelope() {
    let s = checks::hellinger_sandwich(100, 21);
    assert!(s.lower_margin >= -1e-3 && s.upper_margin >= -1e-3);
}

#[test]
fn hellinger_half_at_single_atom() {
    // Constant CPMs give the same gap at every covariate, as for a single atom.
    let grid = GridSpec::interval(0.0, 1.0, 2).unwrap();
    let density = DensitySpec::tensor(&grid, vec![vec![1.0, 1.0]]).unwrap();
    let model = common::Identity;
    let sigma: f64 = 0.7;
    let gap = (8.0 * sigma * sigma * 2f64.ln()).sqrt();
    let a = GridFunction::constant(grid.clone(), &[0.0]);
    let b = GridFunction::constant(grid.clone(), &[gap]);
    let h = hellinger_normalized(&model, &a, &b, sigma, &density).unwrap();
    assert!((h * h - 0.5).abs() < 1e-12);
    assert_eq!(hellinger_normalized(&model, &a, &a, sigma, &density).unwrap(), 0.0);
}

#[test]
fn c_u_at_reference_point() {
    let u = (2.0 * 2f64.ln()).sqrt();
    assert!((c_u(u).unwrap() - 1.0 / (8.0 * 2f64.ln())).abs() < 1e-12);
    let tiny = c_u(1e-6).unwrap();
    assert!((0.2499999..=0.25).contains(&tiny));
    assert!(c_u(0.0).is_err());
}

#[test]
fn sobolev_first_order_matches_finite_difference_oracle() {
    let grid = common::grid(65);
    for f in [|x: f64| x.exp(), |x: f64| (3.0 * x).sin() + x * x, |x: f64| 1.0 / (1.0 + x)] {
        let g = GridFunction::from_fn(grid.clone(), 1, |x| Ok(vec![f(x[0])])).unwrap();
        let m = 20_000;
        let h = 1.0 / m as f64;
        let mut sq = 0.0;
        for i in 0..m {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let mid = f(0.5 * (a + b));
            let slope = (f(b) - f(a)) / h;
            sq += h * (mid * mid + slope * slope);
        }
        let oracle = sq.sqrt();
        let spectral = sobolev_norm(&g, 1.0).unwrap();
        assert!((spectral - oracle).abs() <= 0.02 * oracle, "{spectral} vs {oracle}");
    }
}

#[test]
fn uniform_l2_mu_is_l2_over_root_volume() {
    let grid = GridSpec::new(vec![0.0, -1.0], vec![2.0, 2.0], vec![5, 7]).unwrap();
    let density = DensitySpec::uniform(&grid);
    let f = GridFunction::constant(grid.clone(), &[3.0, 4.0]);
    let vol = grid.volume();
    assert!((l2_mu_norm(&f, &density).unwrap() - 5.0).abs() < 1e-12);
    assert!((l2_mu_norm(&f, &density).unwrap() - l2_norm(&f) / vol.sqrt()).abs() < 1e-12);
}

#[test]
fn delta_n_decreases_in_n_and_dimension() {
    for alpha in [1.0, 2.0, 3.5] {
        for n in [2usize, 10, 1000, 100_000] {
            let s1 = RateSchedule::new(alpha, 0.0, 1);
            assert!(delta_n(n + 1, &s1) < delta_n(n, &s1));
            for d in 1..4 {
                let lo = RateSchedule::new(alpha + 2.0, 0.0, d);
                let hi = RateSchedule::new(alpha + 2.0, 0.0, d + 1);
                assert!(delta_n(n, &hi) > delta_n(n, &lo));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn d_g_is_a_semimetric(seed in any::<u64>()) {
        let grid = common::grid(9);
        let model = common::model();
        let prior = common::prior(&grid, 2.0, 4);
        let density = DensitySpec::uniform(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c) = (checks::random_cpm(&prior, &mut rng), checks::random_cpm(&prior, &mut rng), checks::random_cpm(&prior, &mut rng));
        let ab = d_g(&model, &a, &b, &density).unwrap();
        let bc = d_g(&model, &b, &c, &density).unwrap();
        let ac = d_g(&model, &a, &c, &density).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((ab - d_g(&model, &b, &a, &density).unwrap()).abs() < 1e-12);
        prop_assert_eq!(d_g(&model, &a, &a, &density).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_monotone_in_order(seed in any::<u64>(), b1 in 0.0f64..2.0, db in 0.0f64..2.0) {
        let grid = common::grid(21);
        let prior = common::prior(&grid, 2.0, 2);
        let f = prior.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(sobolev_norm(&f, b1).unwrap() <= sobolev_norm(&f, b1 + db).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn hellinger_is_bounded(seed in any::<u64>(), sigma in 0.05f64..3.0) {
        let grid = common::grid(9);
        let model = common::model();
        let prior = common::prior(&grid, 2.0, 4);
        let density = DensitySpec::uniform(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (checks::random_cpm(&prior, &mut rng), checks::random_cpm(&prior, &mut rng));
        let h = hellinger_normalized(&model, &a, &b, sigma, &density).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
    }
}
