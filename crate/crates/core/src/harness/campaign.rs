//! Calibration and type-1/type-2 testing campaigns.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{
    build_alternative, calibrate, critical_value, estimate_errors, CriticalMode, ErrorEstimate, ReplicateOutcome,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::Context;
use crate::seeding::{derive_rng, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub experiment_id: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub level: f64,
    /// `(replicate, seed, T_N)` of the successful draws, in replicate order.
    pub draws: Vec<(usize, u64, f64)>,
    pub failed: usize,
    pub critical_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlternativeSummary {
    pub base_tau: Vec<f64>,
    pub amplitude: f64,
    pub separation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignReport {
    pub experiment_id: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub metric: String,
    pub critical_value: f64,
    pub calibration: Option<CalibrationReport>,
    /// Whether calibration and evaluation seeds are disjoint (true when not calibrated).
    pub seeds_disjoint: bool,
    pub alternatives: Vec<AlternativeSummary>,
    pub estimate: ErrorEstimate,
    pub replicates: Vec<ReplicateOutcome>,
}

/// Null draws of `T_N` at the test's sample size and the resulting calibrated `t_N`.
pub fn run_calibration(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    let ctx = Context::build(cfg)?;
    calibration_with(cfg, &ctx)
}

fn calibration_with(cfg: &ExperimentConfig, ctx: &Context) -> Result<CalibrationReport> {
    let t = cfg.test_section()?;
    let (level, reps) = match t.mode {
        CriticalMode::Calibrated { level, reps } => (level, reps),
        CriticalMode::Theory { .. } => return Err(Error::Config("calibration needs mode = \"calibrated\"".into())),
    };
    let class = ctx.class()?;
    let truth = cfg.fixed_truth(class)?;
    let spec = cfg.test_spec(t.n)?;
    let cal = calibrate(&ctx.scenario(cfg), class, &spec, &truth, reps, cfg.root_seed)?;
    let t_n = critical_value(&spec, Some(&cal.draws))?;
    let draws = cal
        .replicates
        .iter()
        .zip(&cal.seeds)
        .zip(&cal.draws)
        .map(|((r, s), v)| (*r, *s, *v))
        .collect();
    Ok(CalibrationReport {
        experiment_id: cfg.experiment_id.clone(),
        n: t.n,
        metric: t.metric.to_string(),
        level,
        draws,
        failed: cal.failed,
        critical_value: t_n,
    })
}

/// Calibration (if configured) followed by the evaluation phase on independent seeds.
pub fn run_test_campaign(cfg: &ExperimentConfig) -> Result<CampaignReport> {
    let ctx = Context::build(cfg)?;
    let t = cfg.test_section()?;
    let alt_cfg = cfg
        .alternative
        .as_ref()
        .ok_or_else(|| Error::Config("missing [alternative] section".into()))?;
    let spec = cfg.test_spec(t.n)?;
    let class = ctx.class()?;
    let null_truth = cfg.fixed_truth(class)?;
    let calibration = match t.mode {
        CriticalMode::Calibrated { .. } => Some(calibration_with(cfg, &ctx)?),
        CriticalMode::Theory { .. } => None,
    };
    let t_n = match &calibration {
        Some(c) => c.critical_value,
        None => critical_value(&spec, None)?,
    };
    if !t_n.is_finite() {
        return Err(Error::Config("alternatives need a finite critical value".into()));
    }
    let scn = ctx.scenario(cfg);
    let dist = scn.distance(t.metric);
    let separation = alt_cfg.separation_multiple * t_n;
    let mut alternatives = Vec::with_capacity(alt_cfg.pool);
    let mut alt_truths = Vec::with_capacity(alt_cfg.pool);
    for i in 0..alt_cfg.pool {
        let mut rng = derive_rng(cfg.root_seed, stream::ALTERNATIVES, i as u64);
        let alt = build_alternative(class, separation, &dist, &alt_cfg.bump, &cfg.optimizer, &mut rng)?;
        alternatives.push(AlternativeSummary {
            base_tau: alt.base_tau.clone(),
            amplitude: alt.amplitude,
            separation: alt.separation,
        });
        alt_truths.push(alt.theta);
    }
    let run = estimate_errors(&scn, class, &spec, t_n, &[null_truth], &alt_truths, cfg.reps, cfg.root_seed)?;
    let seeds_disjoint = match &calibration {
        Some(c) => {
            let cal: HashSet<u64> = c.draws.iter().map(|d| d.1).collect();
            run.replicates.iter().all(|r| !cal.contains(&r.seed))
        }
        None => true,
    };
    Ok(CampaignReport {
        experiment_id: cfg.experiment_id.clone(),
        n: t.n,
        metric: t.metric.to_string(),
        critical_value: t_n,
        calibration,
        seeds_disjoint,
        alternatives,
        estimate: run.estimate,
        replicates: run.replicates,
    })
}
