mod common;

use common::{ball_point, rk4_s1, system};
use gofinv::forward::{forward_map, ForwardModel};
use gofinv::ode::{AffineSystem, OdeModel, SystemKind};
use gofinv::GridFunction;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn times() -> Vec<f64> {
    (0..64).map(|j| j as f64 * 0.1).collect()
}

fn model_on(times: &[f64]) -> OdeModel {
    OdeModel::two_compartment(times[1..].to_vec(), 1.0, 1.0).unwrap()
}

#[test]
fn closed_form_matches_rk4_in_ball() {
    let worst = common::checks::ode_oracle_max_error(200, 1);
    assert!(worst <= 1e-8, "max abs error {worst:e}");
}

#[test]
fn zero_parameters_eigenvalues_and_value_at_one() {
    let model = model_on(&times());
    let c = model.coefficient_map(&[0.0; 4]).unwrap();
    let r5 = 5f64.sqrt();
    assert!((c.rates[0] - (-3.0 + r5) / 2.0).abs() < 1e-12);
    assert!((c.rates[1] - (-3.0 - r5) / 2.0).abs() < 1e-12);
    let (a, s0) = system(&[0.0; 4], 1.0, 1.0);
    let reference = rk4_s1(&a, s0, &[1.0], 1e-4)[0];
    assert!((model.solve_s1(&c, 1.0).unwrap() - reference).abs() < 1e-10);
}

#[test]
fn coefficient_taylor_remainder_is_second_order() {
    let model = model_on(&times());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let p = ball_point(&mut rng, 1.5);
        let v = ball_point(&mut rng, 1.0);
        let jac = model.coefficient_jacobian(&p).unwrap().matrix;
        let base = model.coefficient_map(&p).unwrap().flatten();
        let hs = [1e-1, 1e-2, 1e-3, 1e-4];
        let rem: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let q: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + h * b).collect();
                let moved = model.coefficient_map(&q).unwrap().flatten();
                (0..base.len())
                    .map(|r| {
                        let lin: f64 = (0..4).map(|k| jac[(r, k)] * v[k]).sum();
                        (moved[r] - base[r] - h * lin).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let xs: Vec<f64> = hs.iter().map(|h| h.log10()).collect();
        let ys: Vec<f64> = rem.iter().map(|r| r.log10()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0).abs() <= 0.2, "slope {slope} remainders {rem:?}");
    }
}

#[test]
fn lifted_forward_map_is_log_of_rk4_state() {
    let obs = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let model = OdeModel::two_compartment(obs.to_vec(), 1.0, 1.0).unwrap();
    let grid = common::grid(9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c = ball_point(&mut rng, 1.0);
        let d = ball_point(&mut rng, 1.0);
        let theta = GridFunction::from_fn(grid.clone(), 4, |x| Ok((0..4).map(|k| c[k] + d[k] * x[0]).collect()))
        .unwrap();
        let x = [rand::Rng::random_range(&mut rng, 0.0..1.0)];
        let p = theta.eval(&x).unwrap();
        let (a, s0) = system(&p, 1.0, 1.0);
        let reference = rk4_s1(&a, s0, &obs, 1e-4);
        let g = forward_map(&model, &theta, &x).unwrap();
        for (gj, r) in g.iter().zip(&reference) {
            assert!((gj - r.ln()).abs() < 1e-8);
        }
    }
}

#[test]
fn custom_affine_system_matches_rk4() {
    // Elimination rate 1 + q entering affinely.
    let sys = AffineSystem {
        matrix: vec![vec![-2.0, 1.0], vec![1.0, -1.0]],
        matrix_slopes: vec![vec![vec![-1.0, 0.0], vec![0.0, 0.0]]],
        init: vec![1.0, 0.0],
        init_slopes: vec![vec![0.0, 0.0]],
    };
    let ts = times();
    let model = OdeModel::new(SystemKind::Affine(sys), ts[1..].to_vec(), None, 1.0, 1.0).unwrap();
    for q in [0.0, 0.3, 1.0, 2.5] {
        let a = [[-2.0 - q, 1.0], [1.0, -1.0]];
        let reference = rk4_s1(&a, [1.0, 0.0], &ts, 1e-4);
        let c = model.coefficient_map(&[q]).unwrap();
        for (t, r) in ts.iter().zip(&reference) {
            assert!((c.s1(*t) - r).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn solution_is_positive_and_starts_at_initial_dose(
        p in proptest::collection::vec(-1.5f64..1.5, 4),
        dose in 0.1f64..5.0,
        w in 0.2f64..3.0,
    ) {
        let model = OdeModel::two_compartment(vec![1.0, 2.0, 4.0, 8.0], dose, w).unwrap();
        let c = model.coefficient_map(&p).unwrap();
        prop_assert!(((c.amps.iter().sum::<f64>()) - dose * w * (-p[1]).exp()).abs() < 1e-10 * dose * w * (-p[1]).exp().max(1.0));
        for t in [0.0, 0.5, 1.0, 3.0, 8.0] {
            prop_assert!(model.solve_s1(&c, t).unwrap() > 0.0);
        }
        let mut out = vec![0.0; 4];
        model.evaluate(&p, &mut out).unwrap();
        prop_assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn refining_rk4_does_not_move_the_closed_form(p in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let ts = [0.5, 1.0, 2.0, 4.0];
        let model = OdeModel::two_compartment(ts.to_vec(), 1.0, 1.0).unwrap();
        let c = model.coefficient_map(&p).unwrap();
        let (a, s0) = system(&p, 1.0, 1.0);
        let coarse = rk4_s1(&a, s0, &ts, 0.05);
        let fine = rk4_s1(&a, s0, &ts, 0.025);
        for ((t, x), y) in ts.iter().zip(&coarse).zip(&fine) {
            let exact = c.s1(*t);
            prop_assert!((y - exact).abs() <= (x - exact).abs() + 1e-12);
        }
    }
}
