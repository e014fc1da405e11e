//! Penalised least squares / MAP estimation in whitened coordinates.
//!
//! Minimises `J(ξ) = (1/2σ²N) Σ_i ‖y_i − G(Lξ)(x_i)‖² + (r²/2)‖ξ‖²`, where `L` is the factor
//! of the base prior. With `r = δ_N` this is the posterior mode under the rescaled prior,
//! since `1/(N s_N²) = δ_N²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::posterior::Posterior;
use crate::forward::ForwardModel;

/// Above this many unknowns the Gauss–Newton system is skipped in favour of the gradient.
pub const GAUSS_NEWTON_MAX_DIM: usize = 2000;

const ARMIJO_C1: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Regularization {
    /// `r = δ_N` for the dataset size.
    Named(RegularizationRule),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationRule {
    DeltaN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub r: Regularization,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub restarts: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            r: Regularization::Named(RegularizationRule::DeltaN),
            max_iter: 200,
            grad_tol: 1e-6,
            restarts: 3,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if let Regularization::Fixed(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("regularisation must be positive, got {r}")));
            }
        }
        if self.restarts == 0 || self.max_iter == 0 {
            return Err(Error::InvalidInput("MAP needs at least one restart and one iteration".into()));
        }
        Ok(())
    }
}

/// The Tikhonov–Phillips functional over whitened coordinates.
pub struct MapObjective<'p, 'a, F: ForwardModel + ?Sized> {
    post: &'p Posterior<'a, F>,
    r: f64,
}

impl<'p, 'a, F: ForwardModel + ?Sized> MapObjective<'p, 'a, F> {
    pub fn new(post: &'p Posterior<'a, F>, r: f64) -> Self {
        Self { post, r }
    }

    pub fn regularization(&self) -> f64 {
        self.r
    }

    fn data_scale(&self) -> f64 {
        let n = self.post.n().max(1) as f64;
        1.0 / (2.0 * self.post.sigma().powi(2) * n)
    }

    fn theta(&self, xi: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; xi.len()];
        self.post.theta_nodes(xi, 1.0, &mut t);
        t
    }

    /// The data-misfit part `(1/2σ²N) Σ‖y − G‖²`.
    pub fn data_term(&self, xi: &[f64]) -> Result<f64> {
        Ok(self.data_scale() * self.post.residual_ss(&self.theta(xi))?)
    }

    pub fn value(&self, xi: &[f64]) -> Result<f64> {
        let pen = 0.5 * self.r * self.r * xi.iter().map(|v| v * v).sum::<f64>();
        Ok(self.data_term(xi)? + pen)
    }

    /// `∇J(ξ)` by the chain rule through the forward Jacobian and `Lᵀ`.
    pub fn gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_gradient(xi, false)?.1)
    }

    fn value_gradient(&self, xi: &[f64], gn: bool) -> Result<(f64, Vec<f64>, Option<DMatrix<f64>>)> {
        let theta = self.theta(xi);
        let fit = self.post.data_fit(&theta, gn)?;
        let c = self.data_scale();
        let dp = self.post.prior().components();
        let mut grad = vec![0.0; xi.len()];
        self.post.prior().factor().apply_transpose(&fit.grad, dp, c, &mut grad);
        let r2 = self.r * self.r;
        for (g, x) in grad.iter_mut().zip(xi) {
            *g += r2 * x;
        }
        let value = c * fit.ss + 0.5 * r2 * xi.iter().map(|v| v * v).sum::<f64>();
        let hess = fit.gauss_newton.map(|m| {
            // Lᵀ M L (times 2c: SS = ‖r‖², so its GN Hessian is 2 JᵀJ) plus r² I.
            let l = self.block_factor();
            let mut h = l.transpose() * m * &l * (2.0 * c);
            for i in 0..h.nrows() {
                h[(i, i)] += r2;
            }
            h
        });
        Ok((value, grad, hess))
    }

    fn block_factor(&self) -> DMatrix<f64> {
        let f = self.post.prior().factor();
        let dp = self.post.prior().components();
        let n = f.n();
        let mut l = DMatrix::zeros(n * dp, n * dp);
        for i in 0..n {
            for j in 0..=i {
                let v = f.entry(i, j);
                for c in 0..dp {
                    l[(i * dp + c, j * dp + c)] = v;
                }
            }
        }
        l
    }
}

/// Result of one local minimisation.
#[derive(Clone, Debug)]
pub struct LocalMinimum {
    pub xi: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Gauss–Newton (or steepest descent for large problems) with Armijo backtracking.
pub fn minimize_from<F: ForwardModel + ?Sized>(
    obj: &MapObjective<'_, '_, F>,
    start: Vec<f64>,
    max_iter: usize,
    grad_tol: f64,
) -> Result<LocalMinimum> {
    let use_gn = start.len() <= GAUSS_NEWTON_MAX_DIM;
    let mut xi = start;
    let (mut value, mut grad, mut hess) = obj.value_gradient(&xi, use_gn)?;
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < max_iter {
        let gnorm = norm(&grad);
        if gnorm <= grad_tol {
            break;
        }
        iterations += 1;
        let mut damping = 0.0;
        let mut moved = false;
        for attempt in 0..6 {
            let dir: Vec<f64> = match (&hess, attempt < 5) {
                (Some(h), true) => {
                    let mut m = h.clone();
                    for i in 0..m.nrows() {
                        m[(i, i)] += damping;
                    }
                    match m.cholesky() {
                        Some(ch) => ch.solve(&DVector::from_iterator(grad.len(), grad.iter().map(|g| -g))).as_slice().to_vec(),
                        None => grad.iter().map(|g| -g).collect(),
                    }
                }
                _ => grad.iter().map(|g| -g).collect(),
            };
            let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
            if !(slope < 0.0) {
                damping = if damping == 0.0 { 1e-3 } else { damping * 10.0 };
                continue;
            }
            // Scale steepest-descent steps so the first trial moves a unit distance at most.
            let mut t = if hess.is_some() && attempt < 5 { 1.0 } else { (1.0 / norm(&dir)).min(1.0) };
            while t > 1e-12 {
                let trial: Vec<f64> = xi.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
                if let Ok(v) = obj.value(&trial) {
                    if v <= value + ARMIJO_C1 * t * slope {
                        let rel = (value - v) / value.abs().max(1e-300);
                        xi = trial;
                        let (nv, ng, nh) = obj.value_gradient(&xi, use_gn)?;
                        value = nv;
                        grad = ng;
                        hess = nh;
                        trace.push(value);
                        moved = true;
                        stalled = if rel < 1e-14 { stalled + 1 } else { 0 };
                        break;
                    }
                }
                t *= 0.5;
            }
            if moved {
                break;
            }
            damping = if damping == 0.0 { 1e-3 } else { damping * 10.0 };
        }
        if !moved || stalled >= 3 {
            break;
        }
    }
    let grad_norm = norm(&grad);
    Ok(LocalMinimum { xi, value, grad_norm, converged: grad_norm <= grad_tol, iterations, trace })
}

/// Multistart minimisation: `ξ = 0` plus `restarts − 1` prior draws. Returns the best local
/// minimiser and whether any start reached `grad_tol`.
pub fn minimize_multistart<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    obj: &MapObjective<'_, '_, F>,
    cfg: &MapConfig,
    rng: &mut R,
) -> Result<(LocalMinimum, usize)> {
    cfg.validate()?;
    let dim = obj.post.prior().dim();
    let mut best: Option<LocalMinimum> = None;
    let mut any_converged = false;
    let mut failures = 0;
    for k in 0..cfg.restarts {
        let start = if k == 0 {
            vec![0.0; dim]
        } else {
            obj.post.prior().draw_whitened(rng).xi
        };
        match minimize_from(obj, start, cfg.max_iter, cfg.grad_tol) {
            Ok(m) => {
                any_converged |= m.converged;
                if best.as_ref().is_none_or(|b| m.value < b.value) {
                    best = Some(m);
                }
            }
            Err(e) => {
                log::debug!("MAP restart {k} failed: {e}");
                failures += 1;
            }
        }
    }
    let best = best.ok_or_else(|| Error::Invariant("every MAP restart failed".into()))?;
    if !any_converged {
        log::warn!("MAP not converged: best gradient norm {:.3e}", best.grad_norm);
    }
    Ok((best, failures))
}
