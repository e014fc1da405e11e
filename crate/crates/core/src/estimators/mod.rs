//! Synthetic data, the Gaussian log-likelihood and the two point estimators: the posterior
//! mean (via pCN) and the MAP / penalised least squares estimator.

mod data;
pub mod map;
pub mod pcn;
mod posterior;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use data::{log_likelihood, simulate_dataset, simulate_noiseless, Dataset};
pub use map::{MapConfig, MapObjective, Regularization, RegularizationRule};
pub use pcn::{PcnChain, PcnConfig, PcnInit};
pub use posterior::Posterior;

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::grid::GridFunction;
use crate::metrics::{delta_n, RateSchedule};
use crate::prior::GaussianPrior;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    PosteriorMean,
    Map,
}

/// Which estimator to run and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub pcn: PcnConfig,
    #[serde(default)]
    pub map: MapConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { estimator: EstimatorKind::PosteriorMean, pcn: PcnConfig::default(), map: MapConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostics {
    Pcn {
        acceptance_rate: f64,
        final_step: f64,
        n_samples: usize,
        warnings: Vec<String>,
    },
    Map {
        objective: f64,
        grad_norm: f64,
        converged: bool,
        iterations: usize,
        failed_restarts: usize,
        trace: Vec<f64>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub estimate: GridFunction,
    pub diagnostics: Diagnostics,
    pub wall_time: f64,
}

fn regularization(cfg: &MapConfig, n: usize, prior: &GaussianPrior) -> f64 {
    match cfg.r {
        Regularization::Fixed(r) => r,
        Regularization::Named(RegularizationRule::DeltaN) => {
            let s = prior.spec();
            delta_n(n, &RateSchedule::new(s.matern.smoothness, s.kappa, prior.grid().dim()))
        }
    }
}

/// Posterior-mean estimate `E[θ | D_N]` under the rescaled prior `Π_N`, by pCN.
pub fn pcn_posterior_mean<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &F,
    prior: &GaussianPrior,
    data: &Dataset,
    sigma: f64,
    cfg: &PcnConfig,
    map_cfg: &MapConfig,
    rng: &mut R,
) -> Result<EstimatorResult> {
    let start = Instant::now();
    let post = Posterior::new(model, prior, data, sigma)?;
    let scale = prior.rescale_factor(data.len());
    let init = match cfg.init {
        PcnInit::Zero => vec![0.0; prior.dim()],
        PcnInit::Map => {
            let obj = MapObjective::new(&post, regularization(map_cfg, data.len(), prior));
            let (m, _) = map::minimize_multistart(&obj, map_cfg, rng)?;
            // MAP coordinates are relative to the base factor.
            m.xi.iter().map(|v| v / scale).collect()
        }
    };
    let run = pcn::run_pcn(&post, scale, cfg, init, rng)?;
    let estimate = GridFunction::new(prior.grid().clone(), prior.components(), run.mean)?;
    Ok(EstimatorResult {
        estimate,
        diagnostics: Diagnostics::Pcn {
            acceptance_rate: run.acceptance_rate,
            final_step: run.final_step,
            n_samples: run.n_samples,
            warnings: run.warnings,
        },
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// MAP estimate: the best local minimiser of the Tikhonov–Phillips functional.
pub fn map_estimate<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &F,
    prior: &GaussianPrior,
    data: &Dataset,
    sigma: f64,
    cfg: &MapConfig,
    rng: &mut R,
) -> Result<EstimatorResult> {
    let start = Instant::now();
    let post = Posterior::new(model, prior, data, sigma)?;
    let obj = MapObjective::new(&post, regularization(cfg, data.len(), prior));
    let (best, failed_restarts) = map::minimize_multistart(&obj, cfg, rng)?;
    let mut values = vec![0.0; best.xi.len()];
    post.theta_nodes(&best.xi, 1.0, &mut values);
    let estimate = GridFunction::new(prior.grid().clone(), prior.components(), values)?;
    Ok(EstimatorResult {
        estimate,
        diagnostics: Diagnostics::Map {
            objective: best.value,
            grad_norm: best.grad_norm,
            converged: best.converged,
            iterations: best.iterations,
            failed_restarts,
            trace: best.trace,
        },
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Dispatches on [`EstimatorConfig::estimator`].
pub fn estimate<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: &F,
    prior: &GaussianPrior,
    data: &Dataset,
    sigma: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<EstimatorResult> {
    let out = match cfg.estimator {
        EstimatorKind::PosteriorMean => pcn_posterior_mean(model, prior, data, sigma, &cfg.pcn, &cfg.map, rng)?,
        EstimatorKind::Map => map_estimate(model, prior, data, sigma, &cfg.map, rng)?,
    };
    if out.estimate.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Invariant("estimate is not finite".into()));
    }
    Ok(out)
}
