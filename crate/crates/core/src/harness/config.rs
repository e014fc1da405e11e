//! TOML experiment configuration.
//!
//! A complete file looks like
//!
//! ```toml
//! schema_version = 1
//! experiment_id = "contraction"
//! root_seed = 20240607
//! sigma = 0.1
//! N_grid = [50, 200, 800]
//! reps = 50
//! output_dir = "out"
//! metric = "l2_mu"
//!
//! [model]
//! kind = "two-compartment"
//! obs_times = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
//! dose = 1.0
//! ref_weight = 1.0
//!
//! [grid]
//! lower = [0.0]
//! upper = [1.0]
//! resolution = [33]
//!
//! [prior]
//! smoothness = 2.0
//!
//! [estimator]
//! estimator = "posterior-mean"
//!
//! [truth]
//! kind = "null-element"
//! tau = [0.5, 3.0, 1.0, 1.0, 1.0, 1.5]
//!
//! [null_class]
//! kind = "saturable-exp"
//! lower = [0.0, 0.5, 0.5, 0.5, 0.5, 0.5]
//! upper = [0.9, 6.0, 2.0, 2.0, 2.0, 2.0]
//!
//! [test]
//! metric = "l2_mu"
//! mode = "calibrated"
//! level = 0.05
//! reps = 500
//! N = 200
//!
//! [alternative]
//! separation_multiple = 2.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::gof::{BumpConfig, CriticalMode, NullClass, NullKind, OptConfig, TestSpec};
use crate::grid::{GridFunction, GridSpec};
use crate::metrics::{DensityKind, DensitySpec, Metric, RateSchedule};
use crate::ode::{AffineSystem, OdeModel, SystemKind};
use crate::prior::{GaussianPrior, MaternSpec, PriorSpec, DEFAULT_JITTER};

/// Version of the configuration schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSection {
    TwoCompartment {
        obs_times: Vec<f64>,
        #[serde(default = "one")]
        dose: f64,
        #[serde(default = "one")]
        ref_weight: f64,
    },
    /// A linear system affine in the parameters, mainly for testing.
    Custom {
        obs_times: Vec<f64>,
        #[serde(default)]
        horizon: Option<f64>,
        system: AffineSystem,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSection {
    /// α.
    pub smoothness: f64,
    /// Defaults to 0.3 × the grid diameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
    #[serde(default = "one")]
    pub marginal_sd: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthSection {
    /// A fresh draw of the base prior per replicate, multiplied by `scale`.
    PriorDraw {
        #[serde(default = "one")]
        scale: f64,
    },
    /// The fixed member `θ_τ` of the configured null class.
    NullElement { tau: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NullClassSection {
    pub kind: NullKind,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSection {
    pub metric: Metric,
    #[serde(flatten)]
    pub mode: CriticalMode,
    /// Sample size of the test.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub beta_prime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSection {
    /// Separation `s = multiple × t_N`.
    pub separation_multiple: f64,
    /// Number of distinct alternatives; replicates cycle through them.
    #[serde(default = "one_usize")]
    pub pool: usize,
    #[serde(default)]
    pub bump: BumpConfig,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment_id: String,
    pub root_seed: u64,
    /// Noise level of simulated data; `0` for noiseless data.
    pub sigma: f64,
    /// Noise level assumed by the likelihood when `sigma` is zero or tiny.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood_sigma: Option<f64>,
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub output_dir: PathBuf,
    /// Metric of the rate experiment.
    #[serde(default = "default_metric")]
    pub metric: Metric,
    pub model: ModelSection,
    pub grid: GridSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityKind>,
    pub prior: PriorSection,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub truth: TruthSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_class: Option<NullClassSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<AlternativeSection>,
    #[serde(default)]
    pub optimizer: OptConfig,
}

fn default_metric() -> Metric {
    Metric::L2Mu
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(config_err)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("N_grid must be nonempty and strictly increasing".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be ≥ 0, got {}", self.sigma)));
        }
        if self.sigma == 0.0 && self.likelihood_sigma.is_none() {
            return Err(Error::Config("noiseless data (sigma = 0) needs likelihood_sigma".into()));
        }
        if let Some(alt) = &self.alternative {
            if !(alt.separation_multiple > 0.0) || alt.pool == 0 {
                return Err(Error::Config("alternative: need separation_multiple > 0 and pool ≥ 1".into()));
            }
        }
        self.estimator.pcn.validate().map_err(config_err)?;
        self.estimator.map.validate().map_err(config_err)?;
        self.schedule().validate().map_err(config_err)?;
        if let Some(t) = &self.test {
            self.test_spec(t.n).and_then(|s| s.validate()).map_err(config_err)?;
        }
        Ok(())
    }

    pub fn d_x(&self) -> usize {
        self.grid.lower.len()
    }

    pub fn likelihood_sigma(&self) -> f64 {
        self.likelihood_sigma.unwrap_or(self.sigma)
    }

    /// Rate exponents of the prior, with the test section's `η, β, β'` when present.
    pub fn schedule(&self) -> RateSchedule {
        let mut s = RateSchedule::new(self.prior.smoothness, self.prior.kappa, self.d_x());
        if let Some(t) = &self.test {
            s.eta = t.eta;
            s.beta = t.beta;
            s.beta_prime = t.beta_prime;
        }
        s
    }

    pub fn test_section(&self) -> Result<&TestSection> {
        self.test.as_ref().ok_or_else(|| Error::Config("missing [test] section".into()))
    }

    pub fn test_spec(&self, n: usize) -> Result<TestSpec> {
        let t = self.test_section()?;
        Ok(TestSpec { metric: t.metric, mode: t.mode, n, schedule: self.schedule() })
    }

    pub fn build_model(&self) -> Result<OdeModel> {
        match &self.model {
            ModelSection::TwoCompartment { obs_times, dose, ref_weight } => {
                OdeModel::two_compartment(obs_times.clone(), *dose, *ref_weight)
            }
            ModelSection::Custom { obs_times, horizon, system } => {
                OdeModel::new(SystemKind::Affine(system.clone()), obs_times.clone(), *horizon, 1.0, 1.0)
            }
        }
    }

    pub fn build_grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.lower.clone(), self.grid.upper.clone(), self.grid.resolution.clone())
    }

    pub fn build_density(&self, grid: &GridSpec) -> Result<DensitySpec> {
        match &self.density {
            None => Ok(DensitySpec::uniform(grid)),
            Some(kind) => DensitySpec::new(grid, kind.clone()),
        }
    }

    pub fn build_prior(&self, grid: &GridSpec, components: usize) -> Result<GaussianPrior> {
        let p = &self.prior;
        let mut matern = MaternSpec::with_defaults(p.smoothness, grid);
        if let Some(l) = p.length_scale {
            matern.length_scale = l;
        }
        matern.marginal_sd = p.marginal_sd;
        GaussianPrior::new(PriorSpec { matern, kappa: p.kappa, components, jitter: p.jitter }, grid.clone())
    }

    pub fn build_null_class(&self, grid: &GridSpec, model: &OdeModel) -> Result<NullClass> {
        let s = self
            .null_class
            .as_ref()
            .ok_or_else(|| Error::Config("missing [null_class] section".into()))?;
        match s.kind {
            NullKind::SaturableExp => {
                NullClass::saturable_exp(grid.clone(), s.lower.clone(), s.upper.clone(), model.ref_weight())
            }
            NullKind::AffineLinear => {
                NullClass::affine_linear(grid.clone(), s.lower.clone(), s.upper.clone(), model.ref_weight())
            }
            NullKind::Singleton | NullKind::Custom => match &self.truth {
                TruthSection::NullElement { .. } => Err(Error::Config(
                    "singleton/custom null classes are library-only; use a built-in kind in configs".into(),
                )),
                TruthSection::PriorDraw { .. } => Err(Error::Config("singleton null needs a fixed truth".into())),
            },
        }
    }

    /// The fixed truth of a null-element configuration.
    pub fn fixed_truth(&self, class: &NullClass) -> Result<GridFunction> {
        match &self.truth {
            TruthSection::NullElement { tau } => {
                if !class.contains(tau) {
                    return Err(Error::Config(format!("truth τ = {tau:?} lies outside the nuisance box")));
                }
                class.theta_tau(tau)
            }
            TruthSection::PriorDraw { .. } => Err(Error::Config("this experiment needs a null-element truth".into())),
        }
    }
}
