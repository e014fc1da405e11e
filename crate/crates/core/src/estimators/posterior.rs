//! Data-fit terms evaluated on grid-node values of a CPM.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::data::Dataset;
use crate::forward::ForwardModel;
use crate::grid::Stencil;
use crate::prior::GaussianPrior;

/// Likelihood of a dataset under a forward model, with CPMs parametrised by whitened
/// prior coordinates `θ = s · L ξ`.
pub struct Posterior<'a, F: ForwardModel + ?Sized> {
    model: &'a F,
    prior: &'a GaussianPrior,
    data: &'a Dataset,
    stencils: Vec<Stencil>,
    sigma: f64,
}

/// Sum of squared residuals, its node-space gradient and optionally the Gauss–Newton matrix.
pub(crate) struct DataFit {
    pub ss: f64,
    /// `∂ SS / ∂θ` at the nodes, node-major.
    pub grad: Vec<f64>,
    /// `Σ_i H_iᵀ J_iᵀ J_i H_i` in node space (unscaled by σ, N).
    pub gauss_newton: Option<DMatrix<f64>>,
}

impl<'a, F: ForwardModel + ?Sized> Posterior<'a, F> {
    pub fn new(model: &'a F, prior: &'a GaussianPrior, data: &'a Dataset, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise sd must be positive, got {sigma}")));
        }
        if prior.components() != model.param_dim() {
            return Err(Error::GridMismatch(format!(
                "prior has {} components, model expects {}",
                prior.components(),
                model.param_dim()
            )));
        }
        if data.d_y != model.obs_dim() || (!data.is_empty() && data.d_x != prior.grid().dim()) {
            return Err(Error::GridMismatch("dataset dimensions do not match model and grid".into()));
        }
        let stencils = data.stencils(prior.grid())?;
        Ok(Self { model, prior, data, stencils, sigma })
    }

    pub fn model(&self) -> &F {
        self.model
    }

    pub fn prior(&self) -> &GaussianPrior {
        self.prior
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    /// Node values of `θ = scale · L ξ`.
    pub fn theta_nodes(&self, xi: &[f64], scale: f64, out: &mut [f64]) {
        self.prior.factor().apply(xi, self.prior.components(), scale, out);
    }

    /// `Σ_i ‖y_i − G(θ)(x_i)‖²` for node values `theta`.
    pub fn residual_ss(&self, theta: &[f64]) -> Result<f64> {
        let dp = self.model.param_dim();
        let dy = self.model.obs_dim();
        let mut p = vec![0.0; dp];
        let mut g = vec![0.0; dy];
        let mut ss = 0.0;
        for (i, st) in self.stencils.iter().enumerate() {
            st.apply(theta, dp, &mut p);
            self.model.evaluate(&p, &mut g)?;
            ss += self.data.y(i).iter().zip(&g).map(|(y, v)| (y - v) * (y - v)).sum::<f64>();
        }
        Ok(ss)
    }

    /// `ℓ_N(θ)`.
    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        Ok(-self.residual_ss(theta)? / (2.0 * self.sigma * self.sigma))
    }

    pub(crate) fn data_fit(&self, theta: &[f64], with_gauss_newton: bool) -> Result<DataFit> {
        let dp = self.model.param_dim();
        let dy = self.model.obs_dim();
        let dim = theta.len();
        let mut p = vec![0.0; dp];
        let mut g = vec![0.0; dy];
        let mut jac = vec![0.0; dy * dp];
        let mut grad = vec![0.0; dim];
        let mut gn = with_gauss_newton.then(|| DMatrix::zeros(dim, dim));
        let mut jtj = vec![0.0; dp * dp];
        let mut jtr = vec![0.0; dp];
        let mut ss = 0.0;
        for (i, st) in self.stencils.iter().enumerate() {
            st.apply(theta, dp, &mut p);
            self.model.evaluate_with_jacobian(&p, &mut g, &mut jac)?;
            let y = self.data.y(i);
            jtr.iter_mut().for_each(|v| *v = 0.0);
            for j in 0..dy {
                let r = y[j] - g[j];
                ss += r * r;
                for k in 0..dp {
                    jtr[k] += jac[j * dp + k] * r;
                }
            }
            // d(SS)/dp = −2 Jᵀ r, scattered to the stencil nodes.
            for &(node, w) in &st.entries {
                for k in 0..dp {
                    grad[node * dp + k] -= 2.0 * w * jtr[k];
                }
            }
            if let Some(m) = gn.as_mut() {
                for a in 0..dp {
                    for b in 0..dp {
                        jtj[a * dp + b] = (0..dy).map(|j| jac[j * dp + a] * jac[j * dp + b]).sum();
                    }
                }
                for &(na, wa) in &st.entries {
                    for &(nb, wb) in &st.entries {
                        let w = wa * wb;
                        for a in 0..dp {
                            for b in 0..dp {
                                m[(na * dp + a, nb * dp + b)] += w * jtj[a * dp + b];
                            }
                        }
                    }
                }
            }
        }
        Ok(DataFit { ss, grad, gauss_newton: gn })
    }
}
