//! Small Monte Carlo summaries: binomial intervals and empirical quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub fn wilson_interval(k: usize, n: usize) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    Interval { lo: (center - half).max(0.0).min(p), hi: (center + half).min(1.0).max(p) }
}

/// Conservative empirical `(1 − a)` quantile: the `⌈(n+1)(1−a)⌉`-th order statistic.
///
/// This is the rank rule that guarantees size `≤ a` for exchangeable draws; for the draws
/// `1, …, 100` at `a = 0.05` it returns 96.
pub fn upper_quantile(draws: &[f64], a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidInput(format!("level must lie in (0, 1), got {a}")));
    }
    if draws.is_empty() || draws.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidInput("quantile of an empty or NaN sample".into()));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let rank = (((n + 1) as f64) * (1.0 - a) - 1e-9).ceil() as usize;
    Ok(s[rank.clamp(1, n) - 1])
}

/// Linear-interpolation ("type 7") quantile of a sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    (quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25))
}
