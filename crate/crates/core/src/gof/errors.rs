//! Monte Carlo estimates of type-1/type-2 errors, null calibration and exceedance probes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate, simulate_dataset, simulate_noiseless, EstimatorConfig};
use crate::forward::ForwardModel;
use crate::gof::null_class::NullClass;
use crate::gof::optimize::OptConfig;
use crate::gof::stats::{wilson_interval, Interval};
use crate::gof::testing::{infimum_distance, run_test, Distance, TestSpec};
use crate::grid::GridFunction;
use crate::metrics::{modified_rate, DensitySpec, Metric, RateSchedule};
use crate::prior::GaussianPrior;
use crate::seeding::{derive_seed, rng_from_seed, stream};

/// Minimum replicates per arm for [`estimate_errors`].
pub const MIN_REPS: usize = 50;

/// Everything a replicate needs besides its truth and seed.
pub struct Scenario<'a, F: ForwardModel + ?Sized> {
    pub model: &'a F,
    pub prior: &'a GaussianPrior,
    pub density: &'a DensitySpec,
    /// Noise level of the simulated data; `0` gives noiseless data.
    pub sigma: f64,
    /// Noise level assumed by the likelihood; defaults to `sigma` when positive.
    pub likelihood_sigma: f64,
    pub estimator: &'a EstimatorConfig,
    pub opt: OptConfig,
}

impl<'a, F: ForwardModel + ?Sized> Scenario<'a, F> {
    pub fn new(
        model: &'a F,
        prior: &'a GaussianPrior,
        density: &'a DensitySpec,
        sigma: f64,
        estimator: &'a EstimatorConfig,
    ) -> Self {
        Self { model, prior, density, sigma, likelihood_sigma: sigma, estimator, opt: OptConfig::default() }
    }

    pub fn distance(&self, metric: Metric) -> Distance<'_, F> {
        Distance::new(metric, self.density, self.model)
    }

    /// Simulates `n` observations from `truth` and returns the configured estimate.
    pub fn fit(&self, truth: &GridFunction, n: usize, seed: u64) -> Result<GridFunction> {
        let mut rng = rng_from_seed(seed);
        let data = if self.sigma > 0.0 {
            simulate_dataset(self.model, truth, n, self.sigma, self.density, &mut rng)?
        } else {
            simulate_noiseless(self.model, truth, n, self.density, &mut rng)?
        };
        Ok(estimate(self.model, self.prior, &data, self.likelihood_sigma, self.estimator, &mut rng)?.estimate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthLabel {
    Null,
    Alternative,
}

/// One replicate of a testing campaign; numeric fields are NaN when `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub label: TruthLabel,
    pub truth_index: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
    /// `d(θ̂, θ₀)`.
    pub estimator_error: f64,
    /// `inf_τ d(θ₀, θ_τ)`.
    pub truth_separation: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl ReplicateOutcome {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    /// `T_N ≥ inf d(θ₀, ·) − d(θ̂, θ₀) − slack`.
    pub fn triangle_holds(&self, slack: f64) -> bool {
        !self.ok() || self.statistic >= self.truth_separation - self.estimator_error - self.tolerance - slack
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub type1_hat: f64,
    pub type2_hat: f64,
    /// `type1_hat + type2_hat`.
    pub gamma_hat: f64,
    pub type1_ci: Interval,
    pub type2_ci: Interval,
    pub reps: usize,
    pub null_failed: usize,
    pub alt_failed: usize,
    pub critical_value: f64,
    /// Largest per-truth frequency of `d(θ̂, θ₀) ≥ t_N` over the replicate truths.
    pub sup_probe: f64,
    pub sup_probe_ci: Interval,
    /// Whether `max(type1, type2) ≤ sup_probe + 2 · CI half-width`.
    pub lemma_holds: bool,
    pub triangle_violations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorRun {
    pub estimate: ErrorEstimate,
    /// Null replicates first, then alternatives, each in replicate order.
    pub replicates: Vec<ReplicateOutcome>,
}

/// Truth separations `inf_τ d(θ₀, θ_τ)` of a pool of truths.
pub fn separations<F: ForwardModel + ?Sized>(
    truths: &[GridFunction],
    class: &NullClass,
    dist: &Distance<'_, F>,
    opt: &OptConfig,
) -> Result<Vec<f64>> {
    truths.iter().map(|t| Ok(infimum_distance(t, class, dist, opt)?.value)).collect()
}

#[allow(clippy::too_many_arguments)]
fn run_arm<F: ForwardModel + ?Sized>(
    scn: &Scenario<'_, F>,
    class: &NullClass,
    spec: &TestSpec,
    t_n: f64,
    truths: &[GridFunction],
    truth_sep: &[f64],
    label: TruthLabel,
    reps: usize,
    root_seed: u64,
) -> Vec<ReplicateOutcome> {
    let stream_id = match label {
        TruthLabel::Null => stream::NULL_EVAL,
        TruthLabel::Alternative => stream::ALT_EVAL,
    };
    let dist = scn.distance(spec.metric);
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(root_seed, stream_id, r as u64);
            let ti = r % truths.len();
            let mut out = ReplicateOutcome {
                replicate: r,
                seed,
                label,
                truth_index: ti,
                statistic: f64::NAN,
                critical_value: t_n,
                reject: false,
                estimator_error: f64::NAN,
                truth_separation: truth_sep[ti],
                tolerance: f64::NAN,
                error: None,
            };
            let res = scn.fit(&truths[ti], spec.n, seed).and_then(|theta_hat| {
                let err = dist.eval(&theta_hat, &truths[ti])?;
                let rep = run_test(&theta_hat, class, &dist, t_n, &scn.opt)?;
                Ok((err, rep))
            });
            match res {
                Ok((err, rep)) => {
                    out.statistic = rep.statistic;
                    out.reject = rep.reject;
                    out.estimator_error = err;
                    out.tolerance = rep.tolerance;
                }
                Err(e) => {
                    log::warn!("replicate {r} ({label:?}) failed: {e}");
                    out.error = Some(e.to_string());
                }
            }
            out
        })
        .collect()
}

/// Estimates type-1 and type-2 errors of the test with critical value `t_n`.
///
/// Replicate `r` of each arm uses truth `r mod len` of its pool and a seed derived from
/// `(root_seed, arm, r)`, so results do not depend on thread count or order.
#[allow(clippy::too_many_arguments)]
pub fn estimate_errors<F: ForwardModel + ?Sized>(
    scn: &Scenario<'_, F>,
    class: &NullClass,
    spec: &TestSpec,
    t_n: f64,
    null_truths: &[GridFunction],
    alt_truths: &[GridFunction],
    reps: usize,
    root_seed: u64,
) -> Result<ErrorRun> {
    if reps < MIN_REPS {
        return Err(Error::Insufficient(format!("need at least {MIN_REPS} replicates, got {reps}")));
    }
    if null_truths.is_empty() || alt_truths.is_empty() {
        return Err(Error::InvalidInput("truth pools must be nonempty".into()));
    }
    let dist = scn.distance(spec.metric);
    let null_sep = separations(null_truths, class, &dist, &scn.opt)?;
    let alt_sep = separations(alt_truths, class, &dist, &scn.opt)?;
    let mut replicates = run_arm(scn, class, spec, t_n, null_truths, &null_sep, TruthLabel::Null, reps, root_seed);
    replicates.extend(run_arm(scn, class, spec, t_n, alt_truths, &alt_sep, TruthLabel::Alternative, reps, root_seed));
    let estimate = summarize(&replicates, t_n, null_truths.len(), alt_truths.len())?;
    Ok(ErrorRun { estimate, replicates })
}

/// Aggregates replicate outcomes (order-independent).
pub fn summarize(replicates: &[ReplicateOutcome], t_n: f64, n_null: usize, n_alt: usize) -> Result<ErrorEstimate> {
    let arm = |label| replicates.iter().filter(move |r: &&ReplicateOutcome| r.label == label);
    let ok_count = |label| arm(label).filter(|r| r.ok()).count();
    let (null_ok, alt_ok) = (ok_count(TruthLabel::Null), ok_count(TruthLabel::Alternative));
    if null_ok == 0 || alt_ok == 0 {
        return Err(Error::Insufficient("an arm has no successful replicates".into()));
    }
    let rejects = arm(TruthLabel::Null).filter(|r| r.ok() && r.reject).count();
    let accepts = arm(TruthLabel::Alternative).filter(|r| r.ok() && !r.reject).count();
    let type1_hat = rejects as f64 / null_ok as f64;
    let type2_hat = accepts as f64 / alt_ok as f64;
    let type1_ci = wilson_interval(rejects, null_ok);
    let type2_ci = wilson_interval(accepts, alt_ok);

    let mut sup_probe = 0.0;
    let mut sup_probe_ci = wilson_interval(0, 1);
    for (label, pool) in [(TruthLabel::Null, n_null), (TruthLabel::Alternative, n_alt)] {
        for ti in 0..pool {
            let cell: Vec<&ReplicateOutcome> = arm(label).filter(|r| r.ok() && r.truth_index == ti).collect();
            if cell.is_empty() {
                continue;
            }
            let k = cell.iter().filter(|r| r.estimator_error >= t_n).count();
            let p = k as f64 / cell.len() as f64;
            if p >= sup_probe {
                sup_probe = p;
                sup_probe_ci = wilson_interval(k, cell.len());
            }
        }
    }
    let half = type1_ci.half_width().max(type2_ci.half_width());
    let lemma_holds = type1_hat.max(type2_hat) <= sup_probe + 2.0 * half;
    let triangle_violations = replicates.iter().filter(|r| !r.triangle_holds(1e-9)).count();
    Ok(ErrorEstimate {
        type1_hat,
        type2_hat,
        gamma_hat: type1_hat + type2_hat,
        type1_ci,
        type2_ci,
        reps: replicates.len() / 2,
        null_failed: arm(TruthLabel::Null).count() - null_ok,
        alt_failed: arm(TruthLabel::Alternative).count() - alt_ok,
        critical_value: t_n,
        sup_probe,
        sup_probe_ci,
        lemma_holds,
        triangle_violations,
    })
}

/// Null draws of `T_N` for calibration, from a seed stream disjoint from evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub draws: Vec<f64>,
    pub replicates: Vec<usize>,
    pub seeds: Vec<u64>,
    pub failed: usize,
}

pub fn calibrate<F: ForwardModel + ?Sized>(
    scn: &Scenario<'_, F>,
    class: &NullClass,
    spec: &TestSpec,
    null_truth: &GridFunction,
    reps: usize,
    root_seed: u64,
) -> Result<Calibration> {
    let dist = scn.distance(spec.metric);
    let results: Vec<(usize, u64, Result<f64>)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(root_seed, stream::CALIBRATION, r as u64);
            let t = scn
                .fit(null_truth, spec.n, seed)
                .and_then(|theta_hat| Ok(infimum_distance(&theta_hat, class, &dist, &scn.opt)?.value));
            (r, seed, t)
        })
        .collect();
    let mut cal = Calibration { draws: vec![], replicates: vec![], seeds: vec![], failed: 0 };
    for (r, seed, t) in results {
        match t {
            Ok(v) => {
                cal.draws.push(v);
                cal.replicates.push(r);
                cal.seeds.push(seed);
            }
            Err(e) => {
                log::warn!("calibration draw failed: {e}");
                cal.failed += 1;
            }
        }
    }
    Ok(cal)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// `K · δ_N^{η(β−β')/β}`.
    pub threshold: f64,
    /// Exceedance frequency for each truth.
    pub per_truth: Vec<f64>,
    pub max_probability: f64,
    pub max_ci: Interval,
    pub failed: usize,
}

/// Empirical `sup_{θ₀} P(d(θ̂_N, θ₀) ≥ K δ_N^η)` for each `N`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_boundedness_probe<F: ForwardModel + ?Sized>(
    scn: &Scenario<'_, F>,
    truths: &[GridFunction],
    n_grid: &[usize],
    k: f64,
    metric: Metric,
    schedule: &RateSchedule,
    reps: usize,
    root_seed: u64,
) -> Result<Vec<ProbeRow>> {
    if truths.is_empty() {
        return Err(Error::InvalidInput("probe needs at least one truth".into()));
    }
    let dist = scn.distance(metric);
    let mut rows = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let threshold = k * modified_rate(n, schedule);
        let cells: Vec<Result<bool>> = (0..truths.len() * reps)
            .into_par_iter()
            .map(|j| {
                let (ti, r) = (j / reps, j % reps);
                let index = ((ni * truths.len() + ti) * reps + r) as u64;
                let seed = derive_seed(root_seed, stream::PROBE, index);
                let theta_hat = scn.fit(&truths[ti], n, seed)?;
                Ok(dist.eval(&theta_hat, &truths[ti])? >= threshold)
            })
            .collect();
        let mut per_truth = Vec::with_capacity(truths.len());
        let mut failed = 0;
        let mut max = (0.0, wilson_interval(0, 1));
        for ti in 0..truths.len() {
            let cell = &cells[ti * reps..(ti + 1) * reps];
            let ok: Vec<bool> = cell.iter().filter_map(|c| c.as_ref().ok().copied()).collect();
            failed += cell.len() - ok.len();
            let hits = ok.iter().filter(|b| **b).count();
            let p = if ok.is_empty() { f64::NAN } else { hits as f64 / ok.len() as f64 };
            if p >= max.0 {
                max = (p, wilson_interval(hits, ok.len()));
            }
            per_truth.push(p);
        }
        rows.push(ProbeRow { n, threshold, per_truth, max_probability: max.0, max_ci: max.1, failed });
    }
    Ok(rows)
}
