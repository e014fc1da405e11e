//! Experiment orchestration: configs, rate sweeps, calibration and testing campaigns, and
//! their CSV/JSON outputs.

mod campaign;
pub mod config;
pub mod output;
mod rates;

use serde::{Deserialize, Serialize};

pub use campaign::{run_calibration, run_test_campaign, AlternativeSummary, CalibrationReport, CampaignReport};
pub use config::{ExperimentConfig, SCHEMA_VERSION};
pub use rates::{fit_rate_slope, run_rate_experiment, CellSummary, RateReport, RateRow, SlopeFit, MIN_SUCCESS_FRACTION};

use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::gof::{NullClass, Scenario};
use crate::grid::GridSpec;
use crate::metrics::DensitySpec;
use crate::ode::OdeModel;
use crate::prior::GaussianPrior;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

impl RowStatus {
    pub fn from_error(_: &Error) -> Self {
        RowStatus::Failed
    }
}

/// The immutable objects an experiment shares between its replicates.
pub struct Context {
    pub model: OdeModel,
    pub grid: GridSpec,
    pub density: DensitySpec,
    pub prior: GaussianPrior,
    pub class: Option<NullClass>,
    pub estimator: EstimatorConfig,
}

impl Context {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let model = cfg.build_model()?;
        let grid = cfg.build_grid()?;
        let density = cfg.build_density(&grid)?;
        let prior = cfg.build_prior(&grid, crate::forward::ForwardModel::param_dim(&model))?;
        let class = match &cfg.null_class {
            Some(_) => Some(cfg.build_null_class(&grid, &model)?),
            None => None,
        };
        Ok(Self { model, grid, density, prior, class, estimator: cfg.estimator.clone() })
    }

    pub fn class(&self) -> Result<&NullClass> {
        self.class.as_ref().ok_or_else(|| Error::Config("missing [null_class] section".into()))
    }

    pub fn scenario(&self, cfg: &ExperimentConfig) -> Scenario<'_, OdeModel> {
        let mut scn = Scenario::new(&self.model, &self.prior, &self.density, cfg.sigma, &self.estimator);
        scn.likelihood_sigma = cfg.likelihood_sigma();
        scn.opt = cfg.optimizer.clone();
        scn
    }
}
