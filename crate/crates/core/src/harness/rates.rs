//! Rate sweeps: estimator error against sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::stats::median_iqr;
use crate::harness::{Context, RowStatus};
use crate::harness::config::{ExperimentConfig, TruthSection};
use crate::prior::GaussianPrior;
use crate::seeding::{derive_rng, derive_seed, stream};

/// Cells with a smaller success fraction are flagged.
pub const MIN_SUCCESS_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: f64,
    pub status: RowStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub successes: usize,
    pub failures: usize,
    pub flagged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Distinct `N` values entering the fit.
    pub points: usize,
    /// Points dropped for a nonpositive error.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub experiment_id: String,
    pub metric: String,
    /// Sorted by `(N, replicate)`.
    pub rows: Vec<RateRow>,
    pub cells: Vec<CellSummary>,
    pub slope: Option<SlopeFit>,
    pub theoretical_slope: f64,
    pub notes: Vec<String>,
}

/// OLS of `log(median error)` on `log N`, one point per distinct `N`.
pub fn fit_rate_slope(points: &[(usize, f64)]) -> Result<SlopeFit> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.0).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for n in ns {
        let vals: Vec<f64> = points.iter().filter(|p| p.0 == n).map(|p| p.1).collect();
        let positive: Vec<f64> = vals.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).collect();
        excluded += vals.len() - positive.len();
        if positive.is_empty() {
            continue;
        }
        xs.push((n as f64).ln());
        ys.push(median_iqr(&positive).0.ln());
    }
    if xs.len() < 3 {
        return Err(Error::Insufficient(format!(
            "insufficient N values: slope fit needs at least 3 distinct N, got {}",
            xs.len()
        )));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (m - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept, points: xs.len(), excluded })
}

/// Runs the sweep over `N_grid × reps`, replicate-parallel on the current rayon pool.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    let ctx = Context::build(cfg)?;
    let fixed = match &cfg.truth {
        TruthSection::NullElement { .. } => Some(cfg.fixed_truth(ctx.class()?)?),
        TruthSection::PriorDraw { .. } => None,
    };
    // Truth draws come from the unscaled base prior, one per replicate index.
    let truth_prior: &GaussianPrior = &ctx.prior;
    let scale = match cfg.truth {
        TruthSection::PriorDraw { scale } => scale,
        _ => 1.0,
    };
    let scn = ctx.scenario(cfg);
    let tasks: Vec<(usize, usize)> =
        cfg.n_grid.iter().flat_map(|&n| (0..cfg.reps).map(move |r| (n, r))).collect();
    let rows: Vec<RateRow> = tasks
        .par_iter()
        .map(|&(n, r)| {
            let seed = derive_seed(cfg.root_seed, stream::RATES, (n as u64) << 32 | r as u64);
            let truth = match &fixed {
                Some(t) => Ok(t.clone()),
                None => {
                    let mut rng = derive_rng(cfg.root_seed, stream::TRUTH, r as u64);
                    Ok(truth_prior.sample(&mut rng).scaled(scale))
                }
            };
            let value = truth.and_then(|t| {
                let est = scn.fit(&t, n, seed)?;
                cfg.metric.distance(&est, &t, &ctx.density, &ctx.model)
            });
            match value {
                Ok(v) => RateRow { n, replicate: r, seed, value: v, status: RowStatus::Ok },
                Err(e) => {
                    log::warn!("rate replicate N={n} r={r} failed: {e}");
                    RateRow { n, replicate: r, seed, value: f64::NAN, status: RowStatus::from_error(&e) }
                }
            }
        })
        .collect();
    Ok(summarize_rates(cfg, rows))
}

fn summarize_rates(cfg: &ExperimentConfig, mut rows: Vec<RateRow>) -> RateReport {
    rows.sort_by_key(|r| (r.n, r.replicate));
    let mut cells = Vec::new();
    let mut notes = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.n_grid {
        let ok: Vec<f64> = rows
            .iter()
            .filter(|r| r.n == n && r.status == RowStatus::Ok)
            .map(|r| r.value)
            .collect();
        let total = rows.iter().filter(|r| r.n == n).count();
        let (median, iqr) = if ok.is_empty() { (f64::NAN, f64::NAN) } else { median_iqr(&ok) };
        let flagged = (ok.len() as f64) < MIN_SUCCESS_FRACTION * total as f64;
        if flagged {
            notes.push(format!("N={n}: only {}/{total} replicates succeeded", ok.len()));
        }
        points.extend(ok.iter().map(|v| (n, *v)));
        cells.push(CellSummary { n, median, iqr, successes: ok.len(), failures: total - ok.len(), flagged });
    }
    let slope = match fit_rate_slope(&points) {
        Ok(s) => {
            if s.excluded > 0 {
                notes.push(format!("{} nonpositive errors excluded from the slope fit", s.excluded));
            }
            Some(s)
        }
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    RateReport {
        experiment_id: cfg.experiment_id.clone(),
        metric: cfg.metric.to_string(),
        rows,
        cells,
        slope,
        theoretical_slope: cfg.schedule().theoretical_slope(),
        notes,
    }
}
