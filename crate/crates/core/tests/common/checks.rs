//! Oracle comparisons shared by the unit-level suites and the acceptance run.

use gofinv::estimators::pcn::PcnChain;
use gofinv::estimators::{pcn_posterior_mean, simulate_dataset, Dataset, MapConfig, MapObjective, PcnConfig, Posterior};
use gofinv::forward::forward_on_grid;
use gofinv::metrics::{c_u, d_g, hellinger};
use gofinv::{DensitySpec, GaussianPrior, GridFunction};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ball_point, rk4_s1, system, Identity};

/// Largest `|s₁ − s₁^{RK4}|` over `n_params` draws from the ball `‖p‖ ≤ 2` and `t ∈ {0, 0.1, …, 6.3}`.
pub fn ode_oracle_max_error(n_params: usize, seed: u64) -> f64 {
    let ts: Vec<f64> = (0..64).map(|j| j as f64 * 0.1).collect();
    let model = gofinv::OdeModel::two_compartment(ts[1..].to_vec(), 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_params {
        let p = ball_point(&mut rng, 2.0);
        let (a, s0) = system(&p, 1.0, 1.0);
        let reference = rk4_s1(&a, s0, &ts, 1e-4);
        let c = model.coefficient_map(&p).unwrap();
        for (t, r) in ts.iter().zip(&reference) {
            worst = worst.max((model.solve_s1(&c, *t).unwrap() - r).abs());
        }
    }
    worst
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Worst relative error between the MAP gradient and central differences of the objective.
pub fn map_gradient_worst(points: usize, seed: u64) -> f64 {
    let grid = super::grid(9);
    let model = super::model();
    let prior = super::prior(&grid, 2.0, 4);
    let density = DensitySpec::uniform(&grid);
    let truth = super::saturable(&grid).theta_tau(&super::TAU0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = simulate_dataset(&model, &truth, 60, 0.1, &density, &mut rng).unwrap();
    let post = Posterior::new(&model, &prior, &data, 0.1).unwrap();
    let obj = MapObjective::new(&post, 0.3);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let xi: Vec<f64> = prior.draw_whitened(&mut rng).xi.iter().map(|v| 0.5 * v).collect();
        let g = obj.gradient(&xi).unwrap();
        let mut fd = vec![0.0; xi.len()];
        let mut q = xi.clone();
        let h = 1e-6;
        for k in 0..xi.len() {
            q[k] = xi[k] + h;
            let plus = obj.value(&q).unwrap();
            q[k] = xi[k] - h;
            let minus = obj.value(&q).unwrap();
            q[k] = xi[k];
            fd[k] = (plus - minus) / (2.0 * h);
        }
        worst = worst.max(rel_err(&g, &fd));
    }
    worst
}

/// Batch-means standard error of a scalar chain.
pub fn batch_se(xs: &[f64], batches: usize) -> f64 {
    let len = xs.len() / batches;
    let means: Vec<f64> =
        (0..batches).map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (var / batches as f64).sqrt()
}

pub struct FlatChain {
    /// Largest `|mean| / SE` over the tracked node components.
    pub worst_mean_z: f64,
    /// Largest `|var / target − 1|`.
    pub worst_var_rel: f64,
    pub acceptance: f64,
}

/// pCN with `ℓ ≡ 0` (empty data) and fixed step 0.5 over 20k iterations against the rescaled prior.
pub fn pcn_flat_likelihood(seed: u64) -> FlatChain {
    let grid = super::grid(9);
    let model = super::model();
    let prior = super::prior(&grid, 2.0, 4);
    let empty = Dataset::empty(1, super::OBS_TIMES.len(), 0.1);
    let post = Posterior::new(&model, &prior, &empty, 0.1).unwrap();
    let scale = prior.rescale_factor(200);
    let mut chain = PcnChain::new(&post, scale, 0.5, vec![0.0; prior.dim()]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..2000 {
        chain.step(&mut rng);
    }
    chain.reset_counters();
    let nodes = [0usize, 4, 8];
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(18_000); nodes.len() * 4];
    for _ in 0..18_000 {
        chain.step(&mut rng);
        for (a, &n) in nodes.iter().enumerate() {
            for c in 0..4 {
                traces[a * 4 + c].push(chain.theta()[n * 4 + c]);
            }
        }
    }
    let mut out = FlatChain { worst_mean_z: 0.0, worst_var_rel: 0.0, acceptance: chain.acceptance_rate() };
    for (a, &n) in nodes.iter().enumerate() {
        let f = prior.factor();
        let target = scale * scale * (0..f.n()).map(|j| f.entry(n, j).powi(2)).sum::<f64>();
        for c in 0..4 {
            let t = &traces[a * 4 + c];
            let m = t.iter().sum::<f64>() / t.len() as f64;
            let v = t.iter().map(|x| (x - m).powi(2)).sum::<f64>() / t.len() as f64;
            out.worst_mean_z = out.worst_mean_z.max(m.abs() / batch_se(t, 40));
            out.worst_var_rel = out.worst_var_rel.max((v / target - 1.0).abs());
        }
    }
    out
}

/// Closed-form posterior mean of the node values for `y = H θ + ε`, `θ ~ N(0, s² L Lᵀ)`.
pub fn conjugate_mean(prior: &GaussianPrior, data: &Dataset, scale: f64, sigma: f64) -> Vec<f64> {
    let n = prior.factor().n();
    let l = prior.factor().to_matrix();
    let c = &l * l.transpose() * (scale * scale);
    let st = data.stencils(prior.grid()).unwrap();
    let mut h = DMatrix::zeros(data.len(), n);
    for (i, s) in st.iter().enumerate() {
        for &(j, w) in &s.entries {
            h[(i, j)] += w;
        }
    }
    let y = DVector::from_column_slice(&data.observations);
    let gram = &h * &c * h.transpose() + DMatrix::identity(data.len(), data.len()) * (sigma * sigma);
    let alpha = gram.cholesky().unwrap().solve(&y);
    (c * h.transpose() * alpha).as_slice().to_vec()
}

/// Relative L² error of the pCN posterior mean against the conjugate Gaussian oracle.
pub fn conjugate_error(seed: u64) -> f64 {
    let grid = super::grid(9);
    let prior = super::prior(&grid, 2.0, 1);
    let density = DensitySpec::uniform(&grid);
    let truth = GridFunction::from_fn(grid.clone(), 1, |x| Ok(vec![1.0 + (2.0 * x[0]).sin()])).unwrap();
    let sigma = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = simulate_dataset(&Identity, &truth, 40, sigma, &density, &mut rng).unwrap();
    let cfg = PcnConfig { iters: 60_000, burn_in: 10_000, thin: 2, ..PcnConfig::default() };
    let est = pcn_posterior_mean(&Identity, &prior, &data, sigma, &cfg, &MapConfig::default(), &mut rng).unwrap();
    let oracle = conjugate_mean(&prior, &data, prior.rescale_factor(data.len()), sigma);
    rel_err(est.estimate.values(), &oracle)
}

pub fn random_cpm(prior: &GaussianPrior, rng: &mut ChaCha8Rng) -> GridFunction {
    let offset: Vec<f64> = (0..prior.components()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let c = GridFunction::constant(prior.grid().clone(), &offset);
    c.add_scaled(0.3, &prior.sample(rng)).unwrap()
}

pub struct Sandwich {
    /// `min (h − C_U^{1/2} d_G)` over the pairs.
    pub lower_margin: f64,
    /// `min (d_G / 2 − h)` over the pairs.
    pub upper_margin: f64,
    pub envelope: f64,
}

/// Both sides of the Hellinger sandwich at unit noise, with `U` the sup of `‖G(θ)(x)‖₂` over the sweep.
pub fn hellinger_sandwich(pairs: usize, seed: u64) -> Sandwich {
    let grid = super::grid(17);
    let model = super::model();
    let prior = super::prior(&grid, 2.0, 4);
    let density = DensitySpec::uniform(&grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sweep: Vec<(GridFunction, GridFunction)> =
        (0..pairs).map(|_| (random_cpm(&prior, &mut rng), random_cpm(&prior, &mut rng))).collect();
    let dy = model_obs();
    let envelope = sweep
        .iter()
        .flat_map(|(a, b)| [a, b])
        .flat_map(|t| {
            forward_on_grid(&model, t)
                .unwrap()
                .chunks(dy)
                .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let cu = c_u(envelope).unwrap().sqrt();
    let mut out = Sandwich { lower_margin: f64::INFINITY, upper_margin: f64::INFINITY, envelope };
    for (a, b) in &sweep {
        let dg = d_g(&model, a, b, &density).unwrap();
        let h = hellinger(&model, a, b, 1.0, &density).unwrap();
        out.lower_margin = out.lower_margin.min(h - cu * dg);
        out.upper_margin = out.upper_margin.min(dg / 2.0 - h);
    }
    out
}

fn model_obs() -> usize {
    super::OBS_TIMES.len()
}
