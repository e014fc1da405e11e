use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::grid::{GridFunction, Stencil};
use crate::metrics::DensitySpec;

/// `N` covariate/observation pairs `(x_i, y_i)` with `y_i = G(θ₀)(x_i) + ε_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub d_x: usize,
    pub d_y: usize,
    /// Flat `N × d_x`.
    pub covariates: Vec<f64>,
    /// Flat `N × d_y`.
    pub observations: Vec<f64>,
    pub sigma: f64,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(d_x: usize, d_y: usize, covariates: Vec<f64>, observations: Vec<f64>, sigma: f64) -> Result<Self> {
        if d_x == 0 || d_y == 0 || covariates.len() % d_x != 0 {
            return Err(Error::InvalidInput("covariate array does not match d_x".into()));
        }
        if observations.len() != covariates.len() / d_x * d_y {
            return Err(Error::InvalidInput("observation array does not match N·d_y".into()));
        }
        if covariates.iter().chain(&observations).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(Self { d_x, d_y, covariates, observations, sigma, seed: None })
    }

    pub fn empty(d_x: usize, d_y: usize, sigma: f64) -> Self {
        Self { d_x, d_y, covariates: vec![], observations: vec![], sigma, seed: None }
    }

    pub fn len(&self) -> usize {
        self.covariates.len() / self.d_x
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.d_x..(i + 1) * self.d_x]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.observations[i * self.d_y..(i + 1) * self.d_y]
    }

    /// Interpolation stencils of the covariates on the CPM grid.
    pub fn stencils(&self, grid: &crate::grid::GridSpec) -> Result<Vec<Stencil>> {
        (0..self.len()).map(|i| grid.stencil(self.x(i))).collect()
    }
}

fn simulate_inner<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &F,
    theta0: &GridFunction,
    n: usize,
    sigma: f64,
    density: &DensitySpec,
    rng: &mut R,
) -> Result<Dataset> {
    if theta0.grid() != density.grid() {
        return Err(Error::GridMismatch("truth and covariate density live on different grids".into()));
    }
    if theta0.width() != model.param_dim() {
        return Err(Error::GridMismatch("truth has the wrong number of components".into()));
    }
    let d_x = density.grid().dim();
    let d_y = model.obs_dim();
    let mut covariates = Vec::with_capacity(n * d_x);
    let mut observations = vec![0.0; n * d_y];
    let mut p = vec![0.0; model.param_dim()];
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    for i in 0..n {
        let x = density.sample(rng);
        density.grid().stencil(&x)?.apply(theta0.values(), theta0.width(), &mut p);
        let y = &mut observations[i * d_y..(i + 1) * d_y];
        model.evaluate(&p, y)?;
        if let Some(noise) = &noise {
            for v in y.iter_mut() {
                *v += noise.sample(rng);
            }
        }
        covariates.extend(x);
    }
    Ok(Dataset { d_x, d_y, covariates, observations, sigma, seed: None })
}

/// Draws `x_i ~ μ` i.i.d. and `y_i = G(θ₀)(x_i) + ε_i` with `ε_i ~ N(0, σ² I)`.
pub fn simulate_dataset<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &F,
    theta0: &GridFunction,
    n: usize,
    sigma: f64,
    density: &DensitySpec,
    rng: &mut R,
) -> Result<Dataset> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("noise sd must be positive, got {sigma}")));
    }
    simulate_inner(model, theta0, n, sigma, density, rng)
}

/// Noise-free observations `y_i = G(θ₀)(x_i)`; the `σ → 0` limit used by tests.
pub fn simulate_noiseless<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &F,
    theta0: &GridFunction,
    n: usize,
    density: &DensitySpec,
    rng: &mut R,
) -> Result<Dataset> {
    simulate_inner(model, theta0, n, 0.0, density, rng)
}

/// `ℓ_N(θ) = −(1/2σ²) Σ_i ‖y_i − G(θ)(x_i)‖²`.
pub fn log_likelihood<F: ForwardModel + ?Sized>(
    model: &F,
    theta: &GridFunction,
    data: &Dataset,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput("noise sd must be positive".into()));
    }
    if data.d_y != model.obs_dim() || theta.width() != model.param_dim() {
        return Err(Error::GridMismatch("dataset, CPM and model dimensions disagree".into()));
    }
    let mut p = vec![0.0; model.param_dim()];
    let mut g = vec![0.0; model.obs_dim()];
    let mut ss = 0.0;
    for i in 0..data.len() {
        theta.grid().stencil(data.x(i))?.apply(theta.values(), theta.width(), &mut p);
        model.evaluate(&p, &mut g)?;
        ss += data.y(i).iter().zip(&g).map(|(y, v)| (y - v) * (y - v)).sum::<f64>();
    }
    Ok(-ss / (2.0 * sigma * sigma))
}
