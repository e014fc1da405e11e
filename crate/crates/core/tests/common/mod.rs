#![allow(dead_code)]

use gofinv::estimators::{EstimatorConfig, EstimatorKind};
use gofinv::forward::ForwardModel;
use gofinv::gof::NullClass;
use gofinv::prior::{GaussianPrior, MaternSpec, PriorSpec, DEFAULT_JITTER};
use gofinv::{GridSpec, OdeModel, Result};
pub mod checks;

use rand::Rng;

pub const OBS_TIMES: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
pub const TAU0: [f64; 6] = [0.5, 3.0, 1.0, 1.0, 1.0, 1.5];
pub const BOX_LO: [f64; 6] = [0.0, 0.5, 0.5, 0.5, 0.5, 0.5];
pub const BOX_HI: [f64; 6] = [0.9, 6.0, 2.0, 2.0, 2.0, 2.0];

/// Two-compartment system written out from the model equations, kept apart from the library.
pub fn system(p: &[f64], dose: f64, w0: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let k10 = (p[0] - p[1]).exp();
    let k12 = (p[2] - p[1]).exp();
    let k21 = (p[2] - p[3]).exp();
    ([[-k10 - k12, k12], [k21, -k21]], [dose * w0 * (-p[1]).exp(), 0.0])
}

fn rhs(a: &[[f64; 2]; 2], s: [f64; 2]) -> [f64; 2] {
    [a[0][0] * s[0] + a[0][1] * s[1], a[1][0] * s[0] + a[1][1] * s[1]]
}

/// Fixed-step RK4 for `s' = A s`, returning `s₁` at each requested (sorted) time.
pub fn rk4_s1(a: &[[f64; 2]; 2], s0: [f64; 2], times: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut s = s0;
    let mut t = 0.0;
    for &target in times {
        while target - t > 1e-12 {
            let dt = h.min(target - t);
            let k1 = rhs(a, s);
            let k2 = rhs(a, [s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
            let k3 = rhs(a, [s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
            let k4 = rhs(a, [s[0] + dt * k3[0], s[1] + dt * k3[1]]);
            for i in 0..2 {
                s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += dt;
        }
        out.push(s[0]);
    }
    out
}

/// Uniform draw from the Euclidean ball of radius `r` in R⁴.
pub fn ball_point<R: Rng>(rng: &mut R, r: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..4).map(|_| rng.random_range(-r..r)).collect();
        if p.iter().map(|v| v * v).sum::<f64>() <= r * r {
            return p;
        }
    }
}

/// `G̃(p) = p` in one dimension, so the posterior is conjugate Gaussian.
pub struct Identity;

impl ForwardModel for Identity {
    fn param_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = p[0];
        Ok(())
    }

    fn evaluate_with_jacobian(&self, p: &[f64], out: &mut [f64], jac: &mut [f64]) -> Result<()> {
        out[0] = p[0];
        jac[0] = 1.0;
        Ok(())
    }
}

pub fn model() -> OdeModel {
    OdeModel::two_compartment(OBS_TIMES.to_vec(), 1.0, 1.0).unwrap()
}

pub fn grid(n: usize) -> GridSpec {
    GridSpec::interval(0.0, 1.0, n).unwrap()
}

pub fn prior(grid: &GridSpec, alpha: f64, components: usize) -> GaussianPrior {
    let spec = PriorSpec {
        matern: MaternSpec::with_defaults(alpha, grid),
        kappa: 0.0,
        components,
        jitter: DEFAULT_JITTER,
    };
    GaussianPrior::new(spec, grid.clone()).unwrap()
}

pub fn saturable(grid: &GridSpec) -> NullClass {
    NullClass::saturable_exp(grid.clone(), BOX_LO.to_vec(), BOX_HI.to_vec(), 1.0).unwrap()
}

pub fn map_config() -> EstimatorConfig {
    EstimatorConfig { estimator: EstimatorKind::Map, ..Default::default() }
}
