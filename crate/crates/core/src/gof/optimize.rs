//! Box-constrained multistart Nelder–Mead.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    pub n_starts: usize,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// ... and the simplex diameter, relative to the box, below this.
    pub x_tol: f64,
    /// Seed of the Latin-hypercube start design.
    pub seed: u64,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { n_starts: 8, max_evals: 4000, f_tol: 1e-12, x_tol: 1e-9, seed: 0x9e37_79b9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Starts at which the objective was finite.
    pub valid_starts: usize,
    /// Final simplex value spread of the winning start.
    pub spread: f64,
}

/// Start design: the box centre followed by `n − 1` Latin-hypercube points.
pub fn start_points(lower: &[f64], upper: &[f64], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = lower.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect::<Vec<_>>()];
    let m = n.saturating_sub(1);
    if m == 0 {
        return pts;
    }
    let strata: Vec<Vec<usize>> = (0..d)
        .map(|_| {
            let mut s: Vec<usize> = (0..m).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    for i in 0..m {
        pts.push(
            (0..d)
                .map(|k| {
                    let u = (strata[k][i] as f64 + rng.random::<f64>()) / m as f64;
                    lower[k] + u * (upper[k] - lower[k])
                })
                .collect(),
        );
    }
    pts
}

fn clamp_into(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for (k, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lower[k], upper[k]);
    }
}

/// Nelder–Mead from one start; points are projected back into the box.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptConfig,
) -> OptOutcome {
    let d = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for k in 0..d {
        let mut p = start.to_vec();
        let step = 0.1 * (upper[k] - lower[k]);
        p[k] = if p[k] + step <= upper[k] { p[k] + step } else { p[k] - step };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
    let diam = |s: &[Vec<f64>]| {
        s[1..]
            .iter()
            .map(|p| {
                (0..d)
                    .map(|k| ((p[k] - s[0][k]) / (upper[k] - lower[k])).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let mut spread = f64::INFINITY;
    while evals < cfg.max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        spread = values[d] - values[0];
        if values[0].is_finite() && spread.abs() <= cfg.f_tol && diam(&simplex) <= cfg.x_tol {
            break;
        }
        if values[0].is_finite() && spread <= cfg.f_tol * values[0].abs().max(1e-300) && diam(&simplex) <= cfg.x_tol {
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|k| simplex[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = (0..d).map(|k| centroid[k] + t * (simplex[d][k] - centroid[k])).collect();
            clamp_into(&mut x, lower, upper);
            x
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let x = along(-0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        for i in 1..=d {
            for k in 0..d {
                simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
            }
            values[i] = eval(&simplex[i], &mut evals);
        }
    }
    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    OptOutcome { x: simplex[best].clone(), value: values[best], evaluations: evals, valid_starts: 0, spread }
}

/// Multistart minimisation over the box. Starts with a non-finite objective are skipped.
pub fn minimize_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    lower: &[f64],
    upper: &[f64],
    cfg: &OptConfig,
) -> Result<OptOutcome> {
    if cfg.n_starts == 0 {
        return Err(Error::InvalidInput("at least one optimiser start is required".into()));
    }
    let mut best: Option<OptOutcome> = None;
    let mut valid = 0;
    let mut evaluations = 0;
    for start in start_points(lower, upper, cfg.n_starts, cfg.seed) {
        evaluations += 1;
        if !f(&start).is_finite() {
            continue;
        }
        valid += 1;
        let out = nelder_mead(&mut f, &start, lower, upper, cfg);
        evaluations += out.evaluations;
        if best.as_ref().is_none_or(|b| out.value < b.value) {
            best = Some(out);
        }
    }
    match best {
        Some(mut b) if b.value.is_finite() => {
            b.valid_starts = valid;
            b.evaluations = evaluations;
            Ok(b)
        }
        _ => Err(Error::EmptyNullClass),
    }
}
