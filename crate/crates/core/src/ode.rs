//! Closed-form solutions of parametrised, time-homogeneous linear ODE-IVPs
//!
//! ```text
//!     ds/dt = A(p) s,    s(0) = s₀(p)
//! ```
//!
//! with a real-diagonalizable `A(p)`. The first state component then has the form
//! `s₁(t, p) = Σᵢ aᵢ(p) exp(λᵢ(p) t)`; the map `p ↦ (aᵢ, λᵢ)` is the coefficient map and the
//! observation model is `G̃(p) = (ln s₁(t_j, p))_j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ForwardModel;

/// Relative gap below which two eigenvalues count as repeated.
pub const TOL_EIG: f64 = 1e-9;

/// Entries with larger magnitude are rejected before exponentiation.
pub const PARAM_GUARD: f64 = 30.0;

/// Singular values below `TOL_RANK · σ_max` do not count towards the numerical rank.
pub const TOL_RANK: f64 = 1e-7;

/// Relative step of the finite-difference coefficient Jacobian.
pub const H_FD: f64 = 1e-5;

/// A validated parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeParams(Vec<f64>);

impl OdeParams {
    pub fn new(p: Vec<f64>, expected_dim: usize) -> Result<Self> {
        if p.len() != expected_dim {
            return Err(Error::InvalidInput(format!(
                "parameter vector has length {}, model expects {expected_dim}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameter vector has non-finite entries".into()));
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A system whose matrix and initial condition are affine in `p`:
/// `A(p) = M + Σ_k p_k S_k`, `s₀(p) = m + Σ_k p_k v_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSystem {
    pub matrix: Vec<Vec<f64>>,
    #[serde(default)]
    pub matrix_slopes: Vec<Vec<Vec<f64>>>,
    pub init: Vec<f64>,
    #[serde(default)]
    pub init_slopes: Vec<Vec<f64>>,
}

impl AffineSystem {
    fn validate(&self) -> Result<()> {
        let ds = self.matrix.len();
        let square = |m: &Vec<Vec<f64>>| m.len() == ds && m.iter().all(|r| r.len() == ds);
        if ds == 0 || !square(&self.matrix) || self.init.len() != ds {
            return Err(Error::InvalidInput("custom system: matrix must be square and match init".into()));
        }
        if !self.matrix_slopes.iter().all(square) {
            return Err(Error::InvalidInput("custom system: slope matrices must match the matrix shape".into()));
        }
        if !self.init_slopes.is_empty()
            && (self.init_slopes.len() != self.matrix_slopes.len()
                || self.init_slopes.iter().any(|v| v.len() != ds))
        {
            return Err(Error::InvalidInput("custom system: init slopes must be d_p vectors of length d_s".into()));
        }
        Ok(())
    }

    fn param_dim(&self) -> usize {
        self.matrix_slopes.len()
    }

    fn assemble(&self, p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let ds = self.matrix.len();
        let mut a = DMatrix::from_fn(ds, ds, |i, j| self.matrix[i][j]);
        let mut s0 = DVector::from_column_slice(&self.init);
        for (k, slope) in self.matrix_slopes.iter().enumerate() {
            for i in 0..ds {
                for j in 0..ds {
                    a[(i, j)] += p[k] * slope[i][j];
                }
            }
            if let Some(v) = self.init_slopes.get(k) {
                for i in 0..ds {
                    s0[i] += p[k] * v[i];
                }
            }
        }
        (a, s0)
    }
}

/// Which linear system the model integrates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SystemKind {
    /// Central/peripheral pharmacokinetic model with log-rate parameters `p ∈ R⁴`.
    TwoCompartment,
    Affine(AffineSystem),
}

/// A parametrised linear ODE-IVP together with its observation design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeModel {
    system: SystemKind,
    obs_times: Vec<f64>,
    horizon: f64,
    dose: f64,
    ref_weight: f64,
}

/// `(aᵢ, λᵢ)` with `s₁(t) = Σᵢ aᵢ e^{λᵢ t}`, rates sorted in decreasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub amps: Vec<f64>,
    pub rates: Vec<f64>,
}

impl CoefficientSet {
    pub fn new(amps: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if amps.len() != rates.len() || amps.is_empty() {
            return Err(Error::InvalidInput("amplitudes and rates must have equal nonzero length".into()));
        }
        if let Some(a) = amps.iter().find(|a| !(**a > 0.0)) {
            return Err(Error::Invariant(format!("non-positive amplitude {a} in coefficient set")));
        }
        Ok(Self { amps, rates })
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// `Σᵢ aᵢ e^{λᵢ t}` without a horizon check.
    pub fn s1(&self, t: f64) -> f64 {
        self.amps
            .iter()
            .zip(&self.rates)
            .map(|(a, l)| a * (l * t).exp())
            .sum()
    }

    /// `(a₁, …, a_r, λ₁, …, λ_r)`.
    pub fn flatten(&self) -> Vec<f64> {
        self.amps.iter().chain(&self.rates).copied().collect()
    }
}

/// Finite-difference Jacobian of the coefficient map and its numerical rank.
#[derive(Clone, Debug)]
pub struct CoefficientJacobian {
    /// Rows `(a₁…a_r, λ₁…λ_r)`, columns `p₁…p_{d_p}`.
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub full_rank: bool,
}

fn guard(p: &[f64]) -> Result<()> {
    if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > PARAM_GUARD) {
        return Err(Error::ParameterRange(format!("p[{k}] = {v} exceeds |p| ≤ {PARAM_GUARD}")));
    }
    Ok(())
}

fn two_compartment_arrays(p: &[f64], dose: f64, ref_weight: f64) -> Result<([[f64; 2]; 2], [f64; 2])> {
    guard(p)?;
    let k10 = (p[0] - p[1]).exp();
    let k12 = (p[2] - p[1]).exp();
    let k21 = (p[2] - p[3]).exp();
    let s0 = dose * ref_weight * (-p[1]).exp();
    let a = [[-k10 - k12, k12], [k21, -k21]];
    if a.iter().flatten().any(|v| !v.is_finite()) || !s0.is_finite() {
        return Err(Error::ParameterRange("non-finite exponential".into()));
    }
    Ok((a, [s0, 0.0]))
}

/// `A(p)` and `s₀(p)` of the two-compartment model.
pub fn two_compartment_system(p: &OdeParams, dose: f64, ref_weight: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if p.as_slice().len() != 4 {
        return Err(Error::InvalidInput("two-compartment model needs p ∈ R⁴".into()));
    }
    if !(dose > 0.0 && ref_weight > 0.0) {
        return Err(Error::InvalidInput("dose and reference weight must be positive".into()));
    }
    let (a, s0) = two_compartment_arrays(p.as_slice(), dose, ref_weight)?;
    Ok((
        DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]]),
        DVector::from_column_slice(&s0),
    ))
}

/// Closed-form coefficients of `s₁` for a 2×2 system.
///
/// Uses `s₁(0) = a₁ + a₂` and `s₁'(0) = (A s₀)₁ = a₁λ₁ + a₂λ₂`.
fn two_by_two_coefficients(a: [[f64; 2]; 2], s0: [f64; 2]) -> Result<([f64; 2], [f64; 2])> {
    let tr = a[0][0] + a[1][1];
    let diff = a[0][0] - a[1][1];
    let disc = diff * diff + 4.0 * a[0][1] * a[1][0];
    if !disc.is_finite() {
        return Err(Error::ParameterRange("non-finite discriminant".into()));
    }
    if disc < 0.0 {
        return Err(Error::NotDiagonalizable(format!("complex eigenvalues (discriminant {disc:e})")));
    }
    let root = disc.sqrt();
    // Avoid cancellation in the smaller-magnitude root.
    let (l1, l2) = if tr <= 0.0 {
        let big = 0.5 * (tr - root);
        let small = if big != 0.0 { (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / big } else { 0.5 * (tr + root) };
        (small, big)
    } else {
        let big = 0.5 * (tr + root);
        let small = if big != 0.0 { (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / big } else { 0.5 * (tr - root) };
        (big, small)
    };
    let (hi, lo) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
    if hi - lo <= TOL_EIG * hi.abs().max(lo.abs()) {
        return Err(Error::NotDiagonalizable(format!("repeated eigenvalue {hi}")));
    }
    let ds1 = a[0][0] * s0[0] + a[0][1] * s0[1];
    let a1 = (ds1 - lo * s0[0]) / (hi - lo);
    let a2 = s0[0] - a1;
    Ok(([a1, a2], [hi, lo]))
}

fn general_coefficients(a: &DMatrix<f64>, s0: &DVector<f64>) -> Result<CoefficientSet> {
    let ds = a.nrows();
    if ds == 1 {
        return CoefficientSet::new(vec![s0[0]], vec![a[(0, 0)]]);
    }
    if ds == 2 {
        let (amps, rates) = two_by_two_coefficients(
            [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]],
            [s0[0], s0[1]],
        )?;
        return CoefficientSet::new(amps.to_vec(), rates.to_vec());
    }
    let schur = a.clone().schur();
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::NotDiagonalizable("complex eigenvalues".into()))?;
    let mut lambdas: Vec<f64> = eig.iter().copied().collect();
    lambdas.sort_by(|x, y| y.total_cmp(x));
    for w in lambdas.windows(2) {
        if w[0] - w[1] <= TOL_EIG * w[0].abs().max(w[1].abs()) {
            return Err(Error::NotDiagonalizable(format!("repeated eigenvalue {}", w[0])));
        }
    }
    let mut v = DMatrix::zeros(ds, ds);
    for (i, &l) in lambdas.iter().enumerate() {
        let shifted = a - DMatrix::identity(ds, ds) * l;
        let svd = shifted.svd(false, true);
        let vt = svd
            .v_t
            .ok_or_else(|| Error::Eigendecomposition("SVD did not return right singular vectors".into()))?;
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .ok_or_else(|| Error::Eigendecomposition("empty SVD".into()))?;
        for r in 0..ds {
            v[(r, i)] = vt[(imin, r)];
        }
    }
    let w = v
        .clone()
        .lu()
        .solve(s0)
        .ok_or_else(|| Error::Eigendecomposition("rank-deficient eigenvector matrix".into()))?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigendecomposition("rank-deficient eigenvector matrix".into()));
    }
    let amps = (0..ds).map(|i| v[(0, i)] * w[i]).collect();
    CoefficientSet::new(amps, lambdas)
}

impl OdeModel {
    /// Builds and validates a model. `horizon` defaults to the last observation time.
    pub fn new(
        system: SystemKind,
        obs_times: Vec<f64>,
        horizon: Option<f64>,
        dose: f64,
        ref_weight: f64,
    ) -> Result<Self> {
        if let SystemKind::Affine(s) = &system {
            s.validate()?;
        }
        if !(dose > 0.0 && dose.is_finite() && ref_weight > 0.0 && ref_weight.is_finite()) {
            return Err(Error::InvalidInput("dose and reference weight must be positive".into()));
        }
        if obs_times.is_empty() {
            return Err(Error::InvalidInput("no observation times".into()));
        }
        let horizon = horizon.unwrap_or(*obs_times.last().unwrap_or(&0.0));
        if obs_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("observation times must be strictly increasing".into()));
        }
        if obs_times.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
            return Err(Error::InvalidInput(format!("observation times must lie in [0, {horizon}]")));
        }
        let model = Self { system, obs_times, horizon, dose, ref_weight };
        let r_int = model.state_dim();
        if model.obs_times.len() < 2 * r_int {
            return Err(Error::InvalidInput(format!(
                "need at least 2·r_int = {} observation times, got {}",
                2 * r_int,
                model.obs_times.len()
            )));
        }
        Ok(model)
    }

    /// The two-compartment model with the given observation design.
    pub fn two_compartment(obs_times: Vec<f64>, dose: f64, ref_weight: f64) -> Result<Self> {
        Self::new(SystemKind::TwoCompartment, obs_times, None, dose, ref_weight)
    }

    pub fn system(&self) -> &SystemKind {
        &self.system
    }

    pub fn obs_times(&self) -> &[f64] {
        &self.obs_times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dose(&self) -> f64 {
        self.dose
    }

    pub fn ref_weight(&self) -> f64 {
        self.ref_weight
    }

    pub fn state_dim(&self) -> usize {
        match &self.system {
            SystemKind::TwoCompartment => 2,
            SystemKind::Affine(s) => s.matrix.len(),
        }
    }

    pub fn params_dim(&self) -> usize {
        match &self.system {
            SystemKind::TwoCompartment => 4,
            SystemKind::Affine(s) => s.param_dim(),
        }
    }

    /// `A(p)` and `s₀(p)`.
    pub fn linear_system(&self, p: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
        self.check_len(p)?;
        match &self.system {
            SystemKind::TwoCompartment => {
                two_compartment_system(&OdeParams(p.to_vec()), self.dose, self.ref_weight)
            }
            SystemKind::Affine(s) => {
                guard(p)?;
                Ok(s.assemble(p))
            }
        }
    }

    fn check_len(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.params_dim() {
            return Err(Error::InvalidInput(format!(
                "parameter vector has length {}, model expects {}",
                p.len(),
                self.params_dim()
            )));
        }
        Ok(())
    }

    /// `(aᵢ(p), λᵢ(p))` from the eigendecomposition of `A(p)`.
    pub fn coefficient_map(&self, p: &[f64]) -> Result<CoefficientSet> {
        self.check_len(p)?;
        match &self.system {
            SystemKind::TwoCompartment => {
                let (a, s0) = two_compartment_arrays(p, self.dose, self.ref_weight)?;
                let (amps, rates) = two_by_two_coefficients(a, s0)?;
                CoefficientSet::new(amps.to_vec(), rates.to_vec())
            }
            SystemKind::Affine(s) => {
                guard(p)?;
                let (a, s0) = s.assemble(p);
                general_coefficients(&a, &s0)
            }
        }
    }

    /// `s₁(t)` for `t ∈ [0, horizon]`.
    pub fn solve_s1(&self, coeffs: &CoefficientSet, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::TimeDomain { t, horizon: self.horizon });
        }
        Ok(coeffs.s1(t))
    }

    /// Central finite-difference Jacobian of the coefficient map.
    pub fn coefficient_jacobian(&self, p: &[f64]) -> Result<CoefficientJacobian> {
        self.coefficient_jacobian_with_step(p, H_FD)
    }

    pub fn coefficient_jacobian_with_step(&self, p: &[f64], h_rel: f64) -> Result<CoefficientJacobian> {
        let base = self.coefficient_map(p)?;
        let rows = 2 * base.len();
        let dp = p.len();
        let mut m = DMatrix::zeros(rows, dp);
        let mut q = p.to_vec();
        for k in 0..dp {
            let h = h_rel * p[k].abs().max(1.0);
            q[k] = p[k] + h;
            let plus = self.coefficient_map(&q)?.flatten();
            q[k] = p[k] - h;
            let minus = self.coefficient_map(&q)?.flatten();
            q[k] = p[k];
            if plus.len() != rows || minus.len() != rows {
                return Err(Error::Eigendecomposition("mode count changed under perturbation".into()));
            }
            for r in 0..rows {
                m[(r, k)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
        let sv = m.clone().svd(false, false).singular_values;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let rank = sv.iter().filter(|s| **s > TOL_RANK * smax).count();
        let full_rank = rank >= rows.min(dp);
        if !full_rank {
            log::warn!("Jacobian rank deficiency: rank {rank} < {} at p = {p:?}", rows.min(dp));
        }
        Ok(CoefficientJacobian { matrix: m, rank, full_rank })
    }

    fn log_obs_from(&self, amps: &[f64], rates: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, &t) in out.iter_mut().zip(&self.obs_times) {
            let s: f64 = amps.iter().zip(rates).map(|(a, l)| a * (l * t).exp()).sum();
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Invariant(format!("s₁({t}) = {s} is not positive")));
            }
            *o = s.ln();
        }
        Ok(())
    }
}

impl ForwardModel for OdeModel {
    fn param_dim(&self) -> usize {
        self.params_dim()
    }

    fn obs_dim(&self) -> usize {
        self.obs_times.len()
    }

    fn evaluate(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.system {
            SystemKind::TwoCompartment => {
                self.check_len(p)?;
                let (a, s0) = two_compartment_arrays(p, self.dose, self.ref_weight)?;
                let (amps, rates) = two_by_two_coefficients(a, s0)?;
                self.log_obs_from(&amps, &rates, out)
            }
            SystemKind::Affine(_) => {
                let c = self.coefficient_map(p)?;
                self.log_obs_from(&c.amps, &c.rates, out)
            }
        }
    }

    /// Chain rule through the finite-difference coefficient Jacobian:
    /// `∂ ln s₁(t)/∂p = s₁(t)⁻¹ Σᵢ e^{λᵢ t} (∂aᵢ + aᵢ t ∂λᵢ)`.
    fn evaluate_with_jacobian(&self, p: &[f64], out: &mut [f64], jac: &mut [f64]) -> Result<()> {
        let c = self.coefficient_map(p)?;
        self.log_obs_from(&c.amps, &c.rates, out)?;
        let r = c.len();
        let dp = p.len();
        let cj = self.coefficient_jacobian_with_step_quiet(p, r)?;
        for (j, &t) in self.obs_times.iter().enumerate() {
            let s1 = out[j].exp();
            for k in 0..dp {
                let mut acc = 0.0;
                for i in 0..r {
                    let e = (c.rates[i] * t).exp();
                    acc += e * (cj[i * dp + k] + c.amps[i] * t * cj[(r + i) * dp + k]);
                }
                jac[j * dp + k] = acc / s1;
            }
        }
        Ok(())
    }
}

impl OdeModel {
    /// Row-major coefficient Jacobian without the rank computation.
    fn coefficient_jacobian_with_step_quiet(&self, p: &[f64], r: usize) -> Result<Vec<f64>> {
        let dp = p.len();
        let rows = 2 * r;
        let mut m = vec![0.0; rows * dp];
        let mut q = p.to_vec();
        for k in 0..dp {
            let h = H_FD * p[k].abs().max(1.0);
            q[k] = p[k] + h;
            let plus = self.coefficient_map(&q)?;
            q[k] = p[k] - h;
            let minus = self.coefficient_map(&q)?;
            q[k] = p[k];
            if plus.len() != r || minus.len() != r {
                return Err(Error::Eigendecomposition("mode count changed under perturbation".into()));
            }
            for i in 0..r {
                m[i * dp + k] = (plus.amps[i] - minus.amps[i]) / (2.0 * h);
                m[(r + i) * dp + k] = (plus.rates[i] - minus.rates[i]) / (2.0 * h);
            }
        }
        Ok(m)
    }
}
