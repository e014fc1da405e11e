//! The pointwise forward model `p ↦ G̃(p) ∈ R^{d_y}` and its lift to grid functions.

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// A pointwise observation model mapping a parameter vector to an observation vector.
///
/// The lifted forward map acts on a CPM `θ` by `G(θ)(x) = G̃(θ(x))`.
pub trait ForwardModel: Sync {
    fn param_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn evaluate(&self, p: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes `G̃(p)` into `out` and the row-major `d_y × d_p` Jacobian into `jac`.
    fn evaluate_with_jacobian(&self, p: &[f64], out: &mut [f64], jac: &mut [f64]) -> Result<()> {
        self.evaluate(p, out)?;
        central_difference_jacobian(self, p, jac)
    }
}

/// Central-difference Jacobian with relative step `1e-5 · max(1, |p_k|)`.
pub fn central_difference_jacobian<F: ForwardModel + ?Sized>(
    model: &F,
    p: &[f64],
    jac: &mut [f64],
) -> Result<()> {
    let (dp, dy) = (model.param_dim(), model.obs_dim());
    let mut shifted = p.to_vec();
    let mut plus = vec![0.0; dy];
    let mut minus = vec![0.0; dy];
    for k in 0..dp {
        let h = 1e-5 * p[k].abs().max(1.0);
        shifted[k] = p[k] + h;
        model.evaluate(&shifted, &mut plus)?;
        shifted[k] = p[k] - h;
        model.evaluate(&shifted, &mut minus)?;
        shifted[k] = p[k];
        for j in 0..dy {
            jac[j * dp + k] = (plus[j] - minus[j]) / (2.0 * h);
        }
    }
    Ok(())
}

/// Evaluates the lifted forward map `G(θ)(x)`.
pub fn forward_map<F: ForwardModel + ?Sized>(
    model: &F,
    theta: &GridFunction,
    x: &[f64],
) -> Result<Vec<f64>> {
    if theta.width() != model.param_dim() {
        return Err(Error::GridMismatch(format!(
            "CPM has {} components but the model expects {}",
            theta.width(),
            model.param_dim()
        )));
    }
    let p = theta.eval(x)?;
    let mut out = vec![0.0; model.obs_dim()];
    model.evaluate(&p, &mut out)?;
    Ok(out)
}

/// `G(θ)` at every grid node, node-major with `d_y` entries per node.
pub fn forward_on_grid<F: ForwardModel + ?Sized>(model: &F, theta: &GridFunction) -> Result<Vec<f64>> {
    if theta.width() != model.param_dim() {
        return Err(Error::GridMismatch(format!(
            "CPM has {} components but the model expects {}",
            theta.width(),
            model.param_dim()
        )));
    }
    let dy = model.obs_dim();
    let n = theta.grid().n_points();
    let mut out = vec![0.0; n * dy];
    for i in 0..n {
        model.evaluate(theta.node(i), &mut out[i * dy..(i + 1) * dy])?;
    }
    Ok(out)
}
