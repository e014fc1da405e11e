use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullKind {
    /// `CL*(a) = (1 − τ₁e^{−τ₂a}) CL*_max`.
    SaturableExp,
    /// `CL*(a) = τ₁ + τ₂a`.
    AffineLinear,
    /// A simple hypothesis `{θ₀}`.
    Singleton,
    Custom,
}

type Evaluator = Arc<dyn Fn(&[f64]) -> Result<GridFunction> + Send + Sync>;

#[derive(Clone)]
enum Members {
    Builtin,
    Singleton(GridFunction),
    Custom(Evaluator),
}

/// A parametric null class `Θ₀ = {θ_τ : τ ∈ 𝒯}` over a box of nuisance parameters.
///
/// The built-in pharmacokinetic classes use `τ = (τ₁, τ₂, CL*_max, V₁*, Q*, V₂*)` and the
/// covariates `x = (a)` or `x = (a, w)`; with a single covariate the weight is fixed at the
/// reference weight.
#[derive(Clone)]
pub struct NullClass {
    kind: NullKind,
    grid: GridSpec,
    width: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    ref_weight: f64,
    members: Members,
}

impl fmt::Debug for NullClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NullClass")
            .field("kind", &self.kind)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

fn check_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != upper.len() {
        return Err(Error::InvalidInput("nuisance box bounds have different lengths".into()));
    }
    for (k, (l, u)) in lower.iter().zip(upper).enumerate() {
        if !(l.is_finite() && u.is_finite() && l < u) {
            return Err(Error::InvalidInput(format!("nuisance box dimension {k}: need finite lo < hi")));
        }
    }
    Ok(())
}

impl NullClass {
    fn pharmacokinetic(kind: NullKind, grid: GridSpec, lower: Vec<f64>, upper: Vec<f64>, ref_weight: f64) -> Result<Self> {
        if lower.len() != 6 {
            return Err(Error::InvalidInput("pharmacokinetic null classes have six nuisance parameters".into()));
        }
        if grid.dim() > 2 {
            return Err(Error::Unsupported("pharmacokinetic classes use covariates (a) or (a, w)".into()));
        }
        if !(ref_weight > 0.0) {
            return Err(Error::InvalidInput("reference weight must be positive".into()));
        }
        check_box(&lower, &upper)?;
        let class = Self { kind, grid, width: 4, lower, upper, ref_weight, members: Members::Builtin };
        class.check_corners()?;
        Ok(class)
    }

    pub fn saturable_exp(grid: GridSpec, lower: Vec<f64>, upper: Vec<f64>, ref_weight: f64) -> Result<Self> {
        Self::pharmacokinetic(NullKind::SaturableExp, grid, lower, upper, ref_weight)
    }

    pub fn affine_linear(grid: GridSpec, lower: Vec<f64>, upper: Vec<f64>, ref_weight: f64) -> Result<Self> {
        Self::pharmacokinetic(NullKind::AffineLinear, grid, lower, upper, ref_weight)
    }

    pub fn singleton(theta0: GridFunction) -> Self {
        Self {
            kind: NullKind::Singleton,
            grid: theta0.grid().clone(),
            width: theta0.width(),
            lower: vec![],
            upper: vec![],
            ref_weight: 1.0,
            members: Members::Singleton(theta0),
        }
    }

    pub fn custom<E>(grid: GridSpec, width: usize, lower: Vec<f64>, upper: Vec<f64>, evaluator: E) -> Result<Self>
    where
        E: Fn(&[f64]) -> Result<GridFunction> + Send + Sync + 'static,
    {
        check_box(&lower, &upper)?;
        let class = Self {
            kind: NullKind::Custom,
            grid,
            width,
            lower,
            upper,
            ref_weight: 1.0,
            members: Members::Custom(Arc::new(evaluator)),
        };
        class.check_corners()?;
        Ok(class)
    }

    fn check_corners(&self) -> Result<()> {
        let d = self.lower.len();
        for corner in 0..(1usize << d) {
            let tau: Vec<f64> = (0..d)
                .map(|k| if (corner >> k) & 1 == 1 { self.upper[k] } else { self.lower[k] })
                .collect();
            self.theta_tau(&tau)
                .map_err(|e| Error::InvalidInput(format!("nuisance box corner {tau:?} is invalid: {e}")))?;
        }
        Ok(())
    }

    pub fn kind(&self) -> NullKind {
        self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Dimension `d_τ` of the nuisance parameter.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, tau: &[f64]) -> bool {
        tau.len() == self.dim()
            && tau
                .iter()
                .enumerate()
                .all(|(k, t)| *t >= self.lower[k] && *t <= self.upper[k])
    }

    /// The member `θ_τ`.
    pub fn theta_tau(&self, tau: &[f64]) -> Result<GridFunction> {
        if tau.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "τ has length {}, class expects {}",
                tau.len(),
                self.dim()
            )));
        }
        match &self.members {
            Members::Singleton(t) => Ok(t.clone()),
            Members::Custom(f) => f(tau),
            Members::Builtin => self.pharmacokinetic_member(tau),
        }
    }

    fn pharmacokinetic_member(&self, tau: &[f64]) -> Result<GridFunction> {
        let ln = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v.ln())
            } else {
                Err(Error::InvalidCpm(format!("{what} = {v} is not positive")))
            }
        };
        let v1 = ln(tau[3], "V1*")?;
        let v2 = ln(tau[5], "V2*")?;
        let (kind, ref_weight, two_d) = (self.kind, self.ref_weight, self.grid.dim() == 2);
        GridFunction::from_fn(self.grid.clone(), 4, |x| {
            let a = x[0];
            let w = if two_d { x[1] } else { ref_weight };
            let w14 = w.powf(0.25);
            let clearance = match kind {
                NullKind::SaturableExp => (1.0 - tau[0] * (-tau[1] * a).exp()) * tau[2],
                _ => tau[0] + tau[1] * a,
            };
            Ok(vec![ln(clearance / w14, "CL*/w^{1/4}")?, v1, ln(tau[4] / w14, "Q*/w^{1/4}")?, v2])
        })
    }
}
