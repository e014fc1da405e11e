//! Preconditioned Crank–Nicolson MCMC in whitened prior coordinates.
//!
//! Proposal `ξ' = √(1−β²) ξ + β ζ` with `ζ ~ N(0, I)`; it leaves the Gaussian prior
//! invariant, so the acceptance ratio only involves the likelihood.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::posterior::Posterior;
use crate::forward::ForwardModel;

/// Target acceptance rate of the burn-in step adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcnConfig {
    /// β ∈ (0, 1].
    pub step: f64,
    pub iters: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Tune β towards [`TARGET_ACCEPTANCE`] during burn-in only.
    #[serde(default = "yes")]
    pub adapt: bool,
    #[serde(default)]
    pub init: PcnInit,
}

fn yes() -> bool {
    true
}

/// Starting point of the chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcnInit {
    /// The prior mean.
    #[default]
    Zero,
    /// The MAP estimate under the configured MAP settings.
    Map,
}

impl Default for PcnConfig {
    fn default() -> Self {
        Self { step: 0.1, iters: 10_000, burn_in: 2_000, thin: 5, adapt: true, init: PcnInit::Zero }
    }
}

impl PcnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::InvalidInput(format!("pCN step must lie in (0, 1], got {}", self.step)));
        }
        if self.burn_in >= self.iters {
            return Err(Error::InvalidInput("burn-in must be shorter than the chain".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidInput("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// A running pCN chain over whitened coordinates.
pub struct PcnChain<'p, 'a, F: ForwardModel + ?Sized> {
    post: &'p Posterior<'a, F>,
    scale: f64,
    step: f64,
    xi: Vec<f64>,
    theta: Vec<f64>,
    loglik: f64,
    prop_xi: Vec<f64>,
    prop_theta: Vec<f64>,
    noise_theta: Vec<f64>,
    zeta: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

impl<'p, 'a, F: ForwardModel + ?Sized> PcnChain<'p, 'a, F> {
    /// Starts a chain at `init` (length `n_nodes · d_p`) with prior scale `scale`.
    pub fn new(post: &'p Posterior<'a, F>, scale: f64, step: f64, init: Vec<f64>) -> Result<Self> {
        let dim = post.prior().dim();
        if init.len() != dim {
            return Err(Error::InvalidInput("initial state has the wrong dimension".into()));
        }
        let mut theta = vec![0.0; dim];
        post.theta_nodes(&init, scale, &mut theta);
        let loglik = post.log_likelihood(&theta)?;
        Ok(Self {
            post,
            scale,
            step,
            xi: init,
            theta,
            loglik,
            prop_xi: vec![0.0; dim],
            prop_theta: vec![0.0; dim],
            noise_theta: vec![0.0; dim],
            zeta: vec![0.0; dim],
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Node values of the current state.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn log_likelihood(&self) -> f64 {
        self.loglik
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn set_step_size(&mut self, step: f64) {
        self.step = step.clamp(1e-6, 1.0);
    }

    /// Accepted / proposed since the last reset.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// One pCN transition. Proposals whose likelihood cannot be evaluated are rejected.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let beta = self.step;
        let rho = (1.0 - beta * beta).sqrt();
        for z in self.zeta.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        // θ is linear in ξ, so the proposal's node values follow without a second product.
        self.post.theta_nodes(&self.zeta, self.scale, &mut self.noise_theta);
        for i in 0..self.xi.len() {
            self.prop_xi[i] = rho * self.xi[i] + beta * self.zeta[i];
            self.prop_theta[i] = rho * self.theta[i] + beta * self.noise_theta[i];
        }
        self.proposed += 1;
        let u: f64 = rng.random();
        let accept = match self.post.log_likelihood(&self.prop_theta) {
            Ok(ll) => {
                let log_ratio = ll - self.loglik;
                if log_ratio >= 0.0 || u.ln() < log_ratio {
                    self.loglik = ll;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        if accept {
            std::mem::swap(&mut self.xi, &mut self.prop_xi);
            std::mem::swap(&mut self.theta, &mut self.prop_theta);
            self.accepted += 1;
        }
        accept
    }
}

/// Output of a pCN run.
#[derive(Clone, Debug)]
pub struct PcnRun {
    /// Node-major chain average of `θ`.
    pub mean: Vec<f64>,
    /// Node-major chain variance of `θ`.
    pub variance: Vec<f64>,
    pub acceptance_rate: f64,
    pub final_step: f64,
    pub n_samples: usize,
    pub warnings: Vec<String>,
}

/// Runs burn-in (with optional step adaptation) and averages the thinned chain.
pub fn run_pcn<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    post: &Posterior<'_, F>,
    scale: f64,
    cfg: &PcnConfig,
    init: Vec<f64>,
    rng: &mut R,
) -> Result<PcnRun> {
    cfg.validate()?;
    let mut chain = PcnChain::new(post, scale, cfg.step, init)?;
    const WINDOW: usize = 50;
    for it in 0..cfg.burn_in {
        chain.step(rng);
        if cfg.adapt && (it + 1) % WINDOW == 0 {
            let a = chain.acceptance_rate();
            let next = chain.step_size() * (2.0 * (a - TARGET_ACCEPTANCE)).exp();
            chain.set_step_size(next);
            chain.reset_counters();
        }
    }
    chain.reset_counters();
    let dim = chain.theta().len();
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    let mut n_samples = 0usize;
    for it in 0..(cfg.iters - cfg.burn_in) {
        chain.step(rng);
        if (it + 1) % cfg.thin == 0 {
            for (i, v) in chain.theta().iter().enumerate() {
                sum[i] += v;
                sum_sq[i] += v * v;
            }
            n_samples += 1;
        }
    }
    if n_samples == 0 {
        return Err(Error::Insufficient("no post-burn-in samples retained".into()));
    }
    let nf = n_samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let variance = sum_sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| (s / nf - m * m).max(0.0))
        .collect();
    let acceptance_rate = chain.acceptance_rate();
    let mut warnings = Vec::new();
    if !(0.01..=0.99).contains(&acceptance_rate) {
        let msg = format!("step size mistuned: acceptance rate {acceptance_rate:.3}");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(PcnRun { mean, variance, acceptance_rate, final_step: chain.step_size(), n_samples, warnings })
}
