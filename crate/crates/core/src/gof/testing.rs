//! The infimum plug-in test, its critical values and alternatives at a prescribed separation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::gof::null_class::NullClass;
use crate::gof::optimize::{minimize_box, OptConfig};
use crate::gof::stats::upper_quantile;
use crate::grid::GridFunction;
use crate::metrics::{modified_rate, DensitySpec, Metric, RateSchedule};

/// Minimum number of null draws for a calibrated critical value.
pub const MIN_CALIBRATION_DRAWS: usize = 100;

/// A metric bound to what it needs to be evaluated.
pub struct Distance<'a, F: ForwardModel + ?Sized> {
    pub metric: Metric,
    pub density: &'a DensitySpec,
    pub model: &'a F,
}

impl<F: ForwardModel + ?Sized> Clone for Distance<'_, F> {
    fn clone(&self) -> Self {
        Self { metric: self.metric, density: self.density, model: self.model }
    }
}

impl<'a, F: ForwardModel + ?Sized> Distance<'a, F> {
    pub fn new(metric: Metric, density: &'a DensitySpec, model: &'a F) -> Self {
        Self { metric, density, model }
    }

    pub fn eval(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        self.metric.distance(f, g, self.density, self.model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CriticalMode {
    /// `t_N = K · δ_N^{η(β−β')/β}`.
    Theory {
        #[serde(rename = "K")]
        k: f64,
    },
    /// Empirical `(1 − level)` quantile of null draws of `T_N`.
    Calibrated { level: f64, reps: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub metric: Metric,
    #[serde(flatten)]
    pub mode: CriticalMode,
    #[serde(rename = "N")]
    pub n: usize,
    pub schedule: RateSchedule,
}

impl TestSpec {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            CriticalMode::Theory { k } if !(k > 0.0 && k.is_finite()) => {
                Err(Error::InvalidInput(format!("K must be positive, got {k}")))
            }
            CriticalMode::Calibrated { level, .. } if !(level > 0.0 && level < 1.0) => {
                Err(Error::InvalidInput(format!("level must lie in (0, 1), got {level}")))
            }
            _ => self.schedule.validate(),
        }
    }
}

/// The critical value `t_N`. Calibrated mode needs at least [`MIN_CALIBRATION_DRAWS`] draws.
pub fn critical_value(spec: &TestSpec, calibration: Option<&[f64]>) -> Result<f64> {
    spec.validate()?;
    match spec.mode {
        CriticalMode::Theory { k } => Ok(k * modified_rate(spec.n, &spec.schedule)),
        CriticalMode::Calibrated { level, .. } => {
            let draws = calibration.unwrap_or(&[]);
            if draws.len() < MIN_CALIBRATION_DRAWS {
                return Err(Error::Insufficient(format!(
                    "calibration needs at least {MIN_CALIBRATION_DRAWS} draws, got {}",
                    draws.len()
                )));
            }
            upper_quantile(draws, level)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Infimum {
    pub value: f64,
    /// Minimiser `τ*`; empty for a singleton class.
    pub tau: Vec<f64>,
    pub evaluations: usize,
    pub valid_starts: usize,
    /// Optimiser tolerance on the reported value.
    pub tolerance: f64,
}

/// `inf_{τ ∈ 𝒯} d(θ̂, θ_τ)` by multistart Nelder–Mead; invalid `τ` score `+∞`.
pub fn infimum_distance<F: ForwardModel + ?Sized>(
    theta_hat: &GridFunction,
    class: &NullClass,
    dist: &Distance<'_, F>,
    opt: &OptConfig,
) -> Result<Infimum> {
    if class.dim() == 0 {
        let theta0 = class.theta_tau(&[])?;
        return Ok(Infimum {
            value: dist.eval(theta_hat, &theta0)?,
            tau: vec![],
            evaluations: 1,
            valid_starts: 1,
            tolerance: 0.0,
        });
    }
    if theta_hat.grid() != class.grid() || theta_hat.width() != class.width() {
        return Err(Error::GridMismatch("estimate and null class live on different grids".into()));
    }
    let objective = |tau: &[f64]| match class.theta_tau(tau) {
        Ok(t) => dist.eval(theta_hat, &t).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    };
    let out = minimize_box(objective, class.lower(), class.upper(), opt)?;
    Ok(Infimum {
        value: out.value,
        tau: out.x,
        evaluations: out.evaluations,
        valid_starts: out.valid_starts,
        tolerance: out.spread.max(opt.f_tol),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// `T_N`.
    pub statistic: f64,
    /// `t_N`.
    pub critical_value: f64,
    /// `Ψ_N = 1{T_N > t_N}`.
    pub reject: bool,
    pub tau_star: Vec<f64>,
    pub evaluations: usize,
    pub valid_starts: usize,
    pub tolerance: f64,
    /// Seed of the optimiser's start design.
    pub seed: u64,
}

impl TestReport {
    pub fn psi(&self) -> u8 {
        self.reject as u8
    }
}

/// Runs `Ψ_N = 1{T_N > t_N}`.
pub fn run_test<F: ForwardModel + ?Sized>(
    theta_hat: &GridFunction,
    class: &NullClass,
    dist: &Distance<'_, F>,
    t_n: f64,
    opt: &OptConfig,
) -> Result<TestReport> {
    if !(t_n >= 0.0) {
        return Err(Error::InvalidInput(format!("critical value must be ≥ 0, got {t_n}")));
    }
    let inf = infimum_distance(theta_hat, class, dist, opt)?;
    Ok(TestReport {
        statistic: inf.value,
        critical_value: t_n,
        reject: inf.value > t_n,
        tau_star: inf.tau,
        evaluations: inf.evaluations,
        valid_starts: inf.valid_starts,
        tolerance: inf.tolerance,
        seed: opt.seed,
    })
}

/// Shape and budget of the perturbation used to leave the null class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BumpConfig {
    /// Bump centre; the grid centre when absent.
    pub center: Option<Vec<f64>>,
    /// Support width per axis; the grid extent when absent.
    pub width: Option<Vec<f64>>,
    /// CPM component that is perturbed.
    pub component: usize,
    /// Largest admissible `c · sup|φ|`.
    pub max_sup: f64,
    /// Base null element; drawn from the middle half of the box when absent.
    pub tau: Option<Vec<f64>>,
}

impl Default for BumpConfig {
    fn default() -> Self {
        Self { center: None, width: None, component: 0, max_sup: 10.0, tau: None }
    }
}

/// An alternative `θ_τ + cφ` with its verified separation from the null class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alternative {
    pub theta: GridFunction,
    pub base_tau: Vec<f64>,
    pub amplitude: f64,
    pub separation: f64,
}

/// Tensor product of raised cosines on the grid, in one CPM component.
pub fn bump(class: &NullClass, cfg: &BumpConfig) -> Result<GridFunction> {
    let grid = class.grid().clone();
    let d = grid.dim();
    let center = cfg
        .center
        .clone()
        .unwrap_or_else(|| (0..d).map(|k| 0.5 * (grid.lower()[k] + grid.upper()[k])).collect());
    let width = cfg
        .width
        .clone()
        .unwrap_or_else(|| (0..d).map(|k| grid.upper()[k] - grid.lower()[k]).collect());
    if center.len() != d || width.len() != d || width.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidInput("bump centre/width must match the grid dimension".into()));
    }
    if cfg.component >= class.width() {
        return Err(Error::InvalidInput(format!("bump component {} out of range", cfg.component)));
    }
    let width_out = class.width();
    GridFunction::from_fn(grid, width_out, |x| {
        let mut v = 1.0;
        for k in 0..d {
            let u = (x[k] - center[k]) / width[k];
            v *= if u.abs() < 0.5 { 0.5 * (1.0 + (2.0 * PI * u).cos()) } else { 0.0 };
        }
        let mut out = vec![0.0; width_out];
        out[cfg.component] = v;
        Ok(out)
    })
}

/// Builds an element at distance `[s, 1.1 s]` from the null class by bisection on `c`.
pub fn build_alternative<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    class: &NullClass,
    separation: f64,
    dist: &Distance<'_, F>,
    cfg: &BumpConfig,
    opt: &OptConfig,
    rng: &mut R,
) -> Result<Alternative> {
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::InvalidInput(format!("separation must be positive, got {separation}")));
    }
    let tau = match &cfg.tau {
        Some(t) => t.clone(),
        None => (0..class.dim())
            .map(|k| {
                let (l, u) = (class.lower()[k], class.upper()[k]);
                l + (0.25 + 0.5 * rng.random::<f64>()) * (u - l)
            })
            .collect(),
    };
    let base = class.theta_tau(&tau)?;
    let phi = bump(class, cfg)?;
    let phi_sup = phi.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if phi_sup == 0.0 {
        return Err(Error::AlternativeFailed("bump vanishes on the grid".into()));
    }
    let c_max = cfg.max_sup / phi_sup;
    let sep = |c: f64| -> Result<(f64, GridFunction)> {
        let theta = base.add_scaled(c, &phi)?;
        Ok((infimum_distance(&theta, class, dist, opt)?.value, theta))
    };
    // No member of the class is closer than the base itself, so g(c) ≤ d(θ_τ + cφ, θ_τ).
    let phi_len = dist.eval(&phi, &GridFunction::zeros(phi.grid().clone(), phi.width()))?;
    let mut hi = (separation / phi_len.max(1e-300)).min(c_max);
    let mut lo = 0.0;
    let (mut g_hi, mut theta_hi) = sep(hi)?;
    while g_hi < separation {
        if hi >= c_max {
            return Err(Error::AlternativeFailed(format!(
                "separation {separation:.4e} unreachable within sup budget {} (reached {g_hi:.4e})",
                cfg.max_sup
            )));
        }
        lo = hi;
        hi = (2.0 * hi).min(c_max);
        (g_hi, theta_hi) = sep(hi)?;
    }
    for _ in 0..60 {
        if g_hi <= 1.1 * separation {
            return Ok(Alternative { theta: theta_hi, base_tau: tau, amplitude: hi, separation: g_hi });
        }
        let mid = 0.5 * (lo + hi);
        let (g, theta) = sep(mid)?;
        if g >= separation {
            hi = mid;
            g_hi = g;
            theta_hi = theta;
        } else {
            lo = mid;
        }
    }
    Err(Error::AlternativeFailed(format!(
        "bisection did not bracket [{separation:.4e}, {:.4e}]",
        1.1 * separation
    )))
}
