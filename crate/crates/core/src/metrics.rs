//! Norms and semimetrics on grid functions, the forward semimetric `d_G`, the Hellinger
//! distance between data laws and the rate formulas.
//!
//! All integrals use the tensor trapezoid rule of the underlying grid.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{forward_on_grid, ForwardModel};
use crate::grid::{GridFunction, GridSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DensityKind {
    Uniform,
    /// Product of per-dimension densities given at the axis nodes.
    Tensor { marginals: Vec<Vec<f64>> },
}

/// A bounded Lebesgue density on the grid box, normalised to unit quadrature mass.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySpec {
    grid: GridSpec,
    kind: DensityKind,
    values: Vec<f64>,
    marginals: Vec<Vec<f64>>,
}

impl DensitySpec {
    pub fn uniform(grid: &GridSpec) -> Self {
        let v = 1.0 / grid.volume();
        let marginals = (0..grid.dim())
            .map(|k| vec![1.0 / (grid.upper()[k] - grid.lower()[k]); grid.resolution()[k]])
            .collect();
        Self {
            grid: grid.clone(),
            kind: DensityKind::Uniform,
            values: vec![v; grid.n_points()],
            marginals,
        }
    }

    pub fn new(grid: &GridSpec, kind: DensityKind) -> Result<Self> {
        match &kind {
            DensityKind::Uniform => Ok(Self::uniform(grid)),
            DensityKind::Tensor { marginals } => Self::tensor(grid, marginals.clone()),
        }
    }

    /// Tensor-product density; each marginal is normalised by its trapezoid integral.
    pub fn tensor(grid: &GridSpec, marginals: Vec<Vec<f64>>) -> Result<Self> {
        if marginals.len() != grid.dim() {
            return Err(Error::GridMismatch("one marginal per grid dimension required".into()));
        }
        let mut normalised = Vec::with_capacity(marginals.len());
        for (k, m) in marginals.iter().enumerate() {
            if m.len() != grid.resolution()[k] {
                return Err(Error::GridMismatch(format!("marginal {k} has the wrong length")));
            }
            if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput(format!("marginal {k} must be finite and nonnegative")));
            }
            let mass: f64 = m.iter().zip(grid.axis_weights(k)).map(|(v, w)| v * w).sum();
            if !(mass > 0.0) {
                return Err(Error::InvalidInput(format!("marginal {k} has zero mass")));
            }
            normalised.push(m.iter().map(|v| v / mass).collect::<Vec<f64>>());
        }
        let values = (0..grid.n_points())
            .map(|i| {
                grid.multi_index(i)
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| normalised[k][j])
                    .product()
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            kind: DensityKind::Tensor { marginals },
            values,
            marginals: normalised,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ess_inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ess_sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Quadrature weight times density at every node; sums to one.
    pub fn weights(&self) -> Vec<f64> {
        self.grid
            .quadrature_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, p)| w * p)
            .collect()
    }

    /// Draws one covariate by per-dimension inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.grid.dim())
            .map(|k| {
                let (lo, hi) = (self.grid.lower()[k], self.grid.upper()[k]);
                let u: f64 = rng.random();
                match self.kind {
                    DensityKind::Uniform => lo + u * (hi - lo),
                    DensityKind::Tensor { .. } => {
                        inverse_cdf_piecewise_linear(&self.grid.axis(k), &self.marginals[k], u)
                    }
                }
            })
            .collect()
    }
}

/// Inverse CDF of the piecewise-linear density with node values `f` (unit trapezoid mass).
pub(crate) fn inverse_cdf_piecewise_linear(x: &[f64], f: &[f64], u: f64) -> f64 {
    let mut acc = 0.0;
    for j in 0..x.len() - 1 {
        let h = x[j + 1] - x[j];
        let mass = 0.5 * h * (f[j] + f[j + 1]);
        if acc + mass >= u || j + 2 == x.len() {
            let target = (u - acc).clamp(0.0, mass);
            let slope = (f[j + 1] - f[j]) / h;
            let s = if slope.abs() < 1e-14 * f[j].abs().max(1e-300) {
                if f[j] > 0.0 { target / f[j] } else { 0.0 }
            } else {
                let disc = (f[j] * f[j] + 2.0 * slope * target).max(0.0);
                2.0 * target / (f[j] + disc.sqrt()).max(1e-300)
            };
            return (x[j] + s.clamp(0.0, h)).min(x[x.len() - 1]);
        }
        acc += mass;
    }
    x[x.len() - 1]
}

fn check_density(f: &GridFunction, density: &DensitySpec) -> Result<()> {
    if f.grid() != density.grid() {
        return Err(Error::GridMismatch("function and density live on different grids".into()));
    }
    Ok(())
}

fn weighted_sq(values: &[f64], width: usize, weights: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * values[i * width..(i + 1) * width].iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// `(∫ ‖f‖₂² dμ)^{1/2}`.
pub fn l2_mu_norm(f: &GridFunction, density: &DensitySpec) -> Result<f64> {
    check_density(f, density)?;
    Ok(weighted_sq(f.values(), f.width(), &density.weights()).sqrt())
}

/// Lebesgue `L²` norm over the grid box.
pub fn l2_norm(f: &GridFunction) -> f64 {
    weighted_sq(f.values(), f.width(), &f.grid().quadrature_weights()).sqrt()
}

/// Largest nodal Euclidean norm.
pub fn sup_norm(f: &GridFunction) -> f64 {
    (0..f.grid().n_points())
        .map(|i| f.node(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Orthogonal cosine transform along one axis of a tensor grid.
///
/// With nodes `x_j = lo + j h`, `j = 0..n-1`, the vectors `cos(π m j/(n-1))` are orthogonal
/// under the trapezoid weights, which gives an exact discrete Parseval identity.
struct CosineAxis {
    n: usize,
    /// `basis[m * n + j] = cos(π m j/(n-1))`.
    basis: Vec<f64>,
    weights: Vec<f64>,
    /// `⟨φ_m, φ_m⟩` under the trapezoid weights.
    norms: Vec<f64>,
    /// Angular frequency `π m / L`.
    freq: Vec<f64>,
}

impl CosineAxis {
    fn new(grid: &GridSpec, k: usize) -> Self {
        let n = grid.resolution()[k];
        let len = grid.upper()[k] - grid.lower()[k];
        let weights = grid.axis_weights(k);
        let mut basis = vec![0.0; n * n];
        for m in 0..n {
            for j in 0..n {
                basis[m * n + j] =
                    (std::f64::consts::PI * (m * j) as f64 / (n - 1) as f64).cos();
            }
        }
        let norms = (0..n)
            .map(|m| (0..n).map(|j| weights[j] * basis[m * n + j].powi(2)).sum())
            .collect();
        let freq = (0..n).map(|m| std::f64::consts::PI * m as f64 / len).collect();
        Self { n, basis, weights, norms, freq }
    }
}

/// Spectral Sobolev norm `(Σ_m (1 + ‖ω_m‖²)^{β'} e_m)^{1/2}` where `e_m` is the energy of the
/// tensor cosine mode with angular frequency `ω_m` (so `β' = 0` is the Lebesgue `L²` norm).
pub fn sobolev_norm(f: &GridFunction, beta_prime: f64) -> Result<f64> {
    if !(beta_prime >= 0.0) {
        return Err(Error::Domain(format!("Sobolev order must be nonnegative, got {beta_prime}")));
    }
    let grid = f.grid();
    let d = grid.dim();
    let axes: Vec<CosineAxis> = (0..d).map(|k| CosineAxis::new(grid, k)).collect();
    let n_pts = grid.n_points();
    let res = grid.resolution().to_vec();
    let mut total = 0.0;
    for c in 0..f.width() {
        let mut coef = f.component(c);
        // Transform one axis at a time: c_m = ⟨f, φ_m⟩_w / ⟨φ_m, φ_m⟩_w.
        let mut stride = 1usize;
        for k in (0..d).rev() {
            let ax = &axes[k];
            let n = ax.n;
            let outer = n_pts / (n * stride);
            let mut line = vec![0.0; n];
            for o in 0..outer {
                for s in 0..stride {
                    let base = o * n * stride + s;
                    for (m, l) in line.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += ax.weights[j] * ax.basis[m * n + j] * coef[base + j * stride];
                        }
                        *l = acc / ax.norms[m];
                    }
                    for (m, l) in line.iter().enumerate() {
                        coef[base + m * stride] = *l;
                    }
                }
            }
            stride *= n;
        }
        for (i, cm) in coef.iter().enumerate() {
            let mut idx = i;
            let mut energy = cm * cm;
            let mut w2 = 0.0;
            for k in (0..d).rev() {
                let m = idx % res[k];
                idx /= res[k];
                energy *= axes[k].norms[m];
                w2 += axes[k].freq[m].powi(2);
            }
            total += (1.0 + w2).powf(beta_prime) * energy;
        }
    }
    Ok(total.sqrt())
}

/// `d_G(θ₁, θ₂) = ‖G(θ₁) − G(θ₂)‖_{L²_λ}`.
pub fn d_g<F: ForwardModel + ?Sized>(
    model: &F,
    theta1: &GridFunction,
    theta2: &GridFunction,
    density: &DensitySpec,
) -> Result<f64> {
    theta1.check_compatible(theta2)?;
    check_density(theta1, density)?;
    let g1 = forward_on_grid(model, theta1)?;
    let g2 = forward_on_grid(model, theta2)?;
    let diff: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
    Ok(weighted_sq(&diff, model.obs_dim(), &density.weights()).sqrt())
}

/// Hellinger distance `h² = ∫(√p₁ − √p₂)²` between the joint laws of `(Y, X)`.
///
/// For equal-variance Gaussian location families this reduces to
/// `h² = 2 (1 − ∫ exp(−‖G(θ₁)(x) − G(θ₂)(x)‖² / (8σ²)) dλ(x))`, so `h ∈ [0, √2]`.
/// With unit noise it satisfies `C_U^{1/2} d_G ≤ h ≤ d_G / 2` whenever `‖G‖ ≤ U`.
pub fn hellinger<F: ForwardModel + ?Sized>(
    model: &F,
    theta1: &GridFunction,
    theta2: &GridFunction,
    sigma: f64,
    density: &DensitySpec,
) -> Result<f64> {
    Ok(2f64.sqrt() * hellinger_normalized(model, theta1, theta2, sigma, density)?)
}

/// Hellinger distance with the `½` normalisation, `h² = 1 − BC ∈ [0, 1]`.
pub fn hellinger_normalized<F: ForwardModel + ?Sized>(
    model: &F,
    theta1: &GridFunction,
    theta2: &GridFunction,
    sigma: f64,
    density: &DensitySpec,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("noise sd must be positive, got {sigma}")));
    }
    theta1.check_compatible(theta2)?;
    check_density(theta1, density)?;
    let g1 = forward_on_grid(model, theta1)?;
    let g2 = forward_on_grid(model, theta2)?;
    let dy = model.obs_dim();
    let affinity: f64 = density
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let sq: f64 = (0..dy).map(|j| (g1[i * dy + j] - g2[i * dy + j]).powi(2)).sum();
            w * (-sq / (8.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok((1.0 - affinity).max(0.0).sqrt())
}

/// `C_u = (1 − e^{−u²/2}) / (2u²)`.
pub fn c_u(u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("C_u needs u > 0, got {u}")));
    }
    let x = 0.5 * u * u;
    // -expm1(-x) keeps full precision for small u.
    Ok(-(-x).exp_m1() / (2.0 * u * u))
}

/// Exponents entering the contraction rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub alpha: f64,
    #[serde(default)]
    pub kappa: f64,
    pub d_x: usize,
    /// Stability exponent η ∈ (0, 1].
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default)]
    pub beta_prime: f64,
}

fn one() -> f64 {
    1.0
}

impl RateSchedule {
    pub fn new(alpha: f64, kappa: f64, d_x: usize) -> Self {
        Self { alpha, kappa, d_x, eta: 1.0, beta: 1.0, beta_prime: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.kappa >= 0.0 && self.d_x >= 1) {
            return Err(Error::InvalidInput("need α > 0, κ ≥ 0, d ≥ 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidInput(format!("η must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.beta_prime >= 0.0 && self.beta_prime < self.beta) {
            return Err(Error::InvalidInput("need 0 ≤ β' < β".into()));
        }
        Ok(())
    }

    /// `(α + κ) / (2α + 2κ + d)`.
    pub fn exponent(&self) -> f64 {
        (self.alpha + self.kappa) / (2.0 * self.alpha + 2.0 * self.kappa + self.d_x as f64)
    }

    /// Slope of `log modified_rate` against `log N`.
    pub fn theoretical_slope(&self) -> f64 {
        -self.exponent() * self.eta * (self.beta - self.beta_prime) / self.beta
    }
}

/// `δ_N = N^{−(α+κ)/(2α+2κ+d)}`; `N` is clamped to at least one.
pub fn delta_n(n: usize, schedule: &RateSchedule) -> f64 {
    (n.max(1) as f64).powf(-schedule.exponent())
}

/// `δ_N^{η(β−β')/β}`.
pub fn modified_rate(n: usize, schedule: &RateSchedule) -> f64 {
    delta_n(n, schedule).powf(schedule.eta * (schedule.beta - schedule.beta_prime) / schedule.beta)
}

/// Distance used by tests and rate experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    L2Mu,
    L2,
    Sobolev(f64),
    Sup,
    DG,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::L2Mu => write!(f, "l2_mu"),
            Metric::L2 => write!(f, "l2"),
            Metric::Sobolev(b) => write!(f, "sobolev:{b}"),
            Metric::Sup => write!(f, "sup"),
            Metric::DG => write!(f, "dG"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2_mu" => Ok(Metric::L2Mu),
            "l2" => Ok(Metric::L2),
            "sup" => Ok(Metric::Sup),
            "dG" => Ok(Metric::DG),
            _ => {
                if let Some(order) = s.strip_prefix("sobolev:") {
                    let b: f64 = order
                        .parse()
                        .map_err(|_| Error::Config(format!("bad Sobolev order in {s:?}")))?;
                    if !(b >= 0.0) {
                        return Err(Error::Config(format!("Sobolev order must be ≥ 0 in {s:?}")));
                    }
                    Ok(Metric::Sobolev(b))
                } else {
                    Err(Error::Config(format!(
                        "unknown metric {s:?}; expected l2_mu | l2 | sobolev:<beta'> | sup | dG"
                    )))
                }
            }
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Metric {
    /// `d(f, g)`; `d_G` needs the forward model, the others ignore it.
    pub fn distance<F: ForwardModel + ?Sized>(
        &self,
        f: &GridFunction,
        g: &GridFunction,
        density: &DensitySpec,
        model: &F,
    ) -> Result<f64> {
        match self {
            Metric::DG => d_g(model, f, g, density),
            _ => self.norm(&f.sub(g)?, density),
        }
    }

    /// Norm of a single function; not defined for `d_G`.
    pub fn norm(&self, f: &GridFunction, density: &DensitySpec) -> Result<f64> {
        match self {
            Metric::L2Mu => l2_mu_norm(f, density),
            Metric::L2 => Ok(l2_norm(f)),
            Metric::Sobolev(b) => sobolev_norm(f, *b),
            Metric::Sup => Ok(sup_norm(f)),
            Metric::DG => Err(Error::Unsupported("d_G is a semimetric between two CPMs".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> GridSpec {
        GridSpec::interval(0.0, 1.0, 201).unwrap()
    }

    #[test]
    fn constant_function_norms() {
        let g = GridSpec::new(vec![0.0, -1.0], vec![2.0, 1.0], vec![9, 7]).unwrap();
        let f = GridFunction::constant(g.clone(), &[3.0, 4.0]);
        let u = DensitySpec::uniform(&g);
        assert!((l2_mu_norm(&f, &u).unwrap() - 5.0).abs() < 1e-12);
        assert!((sup_norm(&f) - 5.0).abs() < 1e-12);
        assert!((l2_norm(&f) / g.volume().sqrt() - 5.0).abs() < 1e-12);
        let bumpy = DensitySpec::tensor(&g, vec![(0..9).map(|i| 1.0 + i as f64).collect(), vec![2.0; 7]]).unwrap();
        assert!((l2_mu_norm(&f, &bumpy).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(l2_mu_norm(&GridFunction::zeros(g.clone(), 2), &u).unwrap(), 0.0);
    }

    #[test]
    fn linear_function_l2_mu() {
        let g = unit();
        let f = GridFunction::from_fn(g.clone(), 1, |x| Ok(vec![x[0]])).unwrap();
        let v = l2_mu_norm(&f, &DensitySpec::uniform(&g)).unwrap();
        // Trapezoid error for ∫x² is h²/6.
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn sup_norm_picks_spike() {
        let g = GridSpec::interval(0.0, 1.0, 11).unwrap();
        let mut vals = vec![0.1; 11];
        vals[4] = -7.0;
        let f = GridFunction::new(g, 1, vals).unwrap();
        assert_eq!(sup_norm(&f), 7.0);
    }

    #[test]
    fn sup_norm_increases_under_refinement_towards_true_max() {
        // Peak at an irrational location so no grid hits it.
        let peak = 1.0 / std::f64::consts::SQRT_2;
        let bump = |x: &[f64]| Ok(vec![(-(x[0] - peak).powi(2) / 0.02).exp()]);
        let vals: Vec<f64> = [5, 17, 65]
            .iter()
            .map(|&n| sup_norm(&GridFunction::from_fn(GridSpec::interval(0.0, 1.0, n).unwrap(), 1, bump).unwrap()))
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2] && vals[2] <= 1.0);
    }

    #[test]
    fn sobolev_zero_order_is_l2() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![13, 9]).unwrap();
        let f = GridFunction::from_fn(g, 2, |x| Ok(vec![x[0].sin() + x[1], (3.0 * x[0] * x[1]).cos()])).unwrap();
        assert!((sobolev_norm(&f, 0.0).unwrap() - l2_norm(&f)).abs() < 1e-8);
    }

    #[test]
    fn sobolev_of_constant_ignores_order() {
        let f = GridFunction::constant(GridSpec::interval(0.0, 1.0, 33).unwrap(), &[-2.5]);
        for b in [0.0, 0.5, 1.0, 3.0] {
            assert!((sobolev_norm(&f, b).unwrap() - 2.5).abs() < 1e-10);
        }
    }

    #[test]
    fn sobolev_h1_of_cosine() {
        let f = GridFunction::from_fn(unit(), 1, |x| Ok(vec![(std::f64::consts::PI * x[0]).cos()])).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        // ‖cos(πx)‖² = 1/2, ‖f'‖² = π²/2.
        let exact = (0.5 * (1.0 + pi2)).sqrt();
        assert!((sobolev_norm(&f, 1.0).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn sobolev_is_monotone_in_order() {
        let f = GridFunction::from_fn(GridSpec::interval(0.0, 1.0, 40).unwrap(), 1, |x| {
            Ok(vec![(5.0 * x[0]).sin() + x[0] * x[0]])
        })
        .unwrap();
        let vals: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 1.5].iter().map(|b| sobolev_norm(&f, *b).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn c_u_values() {
        let v = c_u(1e-6).unwrap();
        assert!((0.2499999..=0.25).contains(&v));
        let u = (2.0 * 2f64.ln()).sqrt();
        assert!((c_u(u).unwrap() - 1.0 / (8.0 * 2f64.ln())).abs() < 1e-15);
        assert!((1.0 / (8.0 * 2f64.ln()) - 0.180337).abs() < 1e-6);
        let vals: Vec<f64> = (1..=50).map(|i| c_u(i as f64 * 0.1).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(c_u(0.0).is_err() && c_u(-1.0).is_err());
    }

    #[test]
    fn rate_formulas() {
        let s = RateSchedule::new(1.0, 0.0, 1);
        assert_eq!(delta_n(1, &s), 1.0);
        assert!((delta_n(1000, &s) - 0.1).abs() < 1e-15);
        let mut m = RateSchedule { alpha: 1.0, kappa: 0.0, d_x: 1, eta: 1.0, beta: 2.0, beta_prime: 1.0 };
        // δ_N = 0.04 ⇒ N = 0.04^{-3}.
        let n = (0.04f64).powf(-3.0).round() as usize;
        assert!((modified_rate(n, &m) - 0.2).abs() < 1e-12);
        m.beta_prime = 0.0;
        m.eta = 0.7;
        assert!((modified_rate(n, &m) - delta_n(n, &m).powf(0.7)).abs() < 1e-15);
        m.beta_prime = 2.0 - 1e-12;
        assert!((modified_rate(n, &m) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn delta_n_monotonicity() {
        for d in 1..4 {
            let s = RateSchedule::new(2.0, 0.0, d);
            let vals: Vec<f64> = [2, 10, 100, 1000].iter().map(|n| delta_n(*n, &s)).collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
        }
        for n in [2, 50, 5000] {
            let a = delta_n(n, &RateSchedule::new(2.0, 0.0, 1));
            let b = delta_n(n, &RateSchedule::new(2.0, 0.0, 2));
            assert!(b > a, "larger dimension means slower rate");
        }
    }

    #[test]
    fn metric_parsing() {
        assert_eq!("l2_mu".parse::<Metric>().unwrap(), Metric::L2Mu);
        assert_eq!("sobolev:1.5".parse::<Metric>().unwrap(), Metric::Sobolev(1.5));
        assert_eq!("dG".parse::<Metric>().unwrap(), Metric::DG);
        assert!("sobolev:x".parse::<Metric>().is_err());
        assert!("linf".parse::<Metric>().is_err());
        for m in [Metric::L2Mu, Metric::L2, Metric::Sobolev(0.5), Metric::Sup, Metric::DG] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
    }

    #[test]
    fn tensor_density_inverse_cdf() {
        let x: Vec<f64> = (0..5).map(|i| i as f64 * 0.25).collect();
        // f(x) = 2x on [0, 1]: F(x) = x², F⁻¹(u) = √u.
        let f: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        for u in [0.01, 0.2, 0.5, 0.9, 0.999] {
            assert!((inverse_cdf_piecewise_linear(&x, &f, u) - u.sqrt()).abs() < 1e-12);
        }
    }
}
