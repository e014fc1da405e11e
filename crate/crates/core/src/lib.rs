//! Bayesian nonparametric goodness-of-fit testing for covariate-to-parameter mappings of
//! linear ODE models.
//!
//! The pieces, bottom up:
//! - [`ode`]: the closed-form solution of `s' = A(p)s` and the forward map `G`.
//! - [`prior`]: Matérn Gaussian-process priors on a grid, with `N`-dependent rescaling.
//! - [`metrics`]: norms, `d_G`, the Hellinger distance and the contraction rates.
//! - [`estimators`]: simulated data, the posterior mean by pCN and the MAP estimator.
//! - [`gof`]: null classes, the infimum plug-in test and Monte Carlo error estimates.
//! - [`harness`]: experiment configs, rate sweeps and testing campaigns with CSV/JSON output.

pub mod error;
pub mod estimators;
pub mod forward;
pub mod gof;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod ode;
pub mod prior;
pub mod seeding;

pub use error::{Error, Result};
pub use forward::ForwardModel;
pub use grid::{GridFunction, GridSpec};
pub use metrics::{DensitySpec, Metric, RateSchedule};
pub use ode::OdeModel;
pub use prior::{GaussianPrior, MaternSpec, PriorSpec};
