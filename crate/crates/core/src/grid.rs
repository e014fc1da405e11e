//! Tensor grids over the covariate domain and vector-valued functions sampled on them.
//!
//! Nodes are stored in row-major order with the last dimension varying fastest.
//! Off-grid evaluation is multilinear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular tensor grid over a box `[lo_1, hi_1] × … × [lo_d, hi_d]` including the endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != resolution.len() {
            return Err(Error::InvalidInput(format!(
                "grid bounds/resolution lengths disagree ({}, {}, {})",
                lower.len(),
                upper.len(),
                resolution.len()
            )));
        }
        for k in 0..lower.len() {
            if !(lower[k].is_finite() && upper[k].is_finite() && lower[k] < upper[k]) {
                return Err(Error::InvalidInput(format!(
                    "grid dimension {k}: need finite lo < hi, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if resolution[k] < 2 {
                return Err(Error::InvalidInput(format!(
                    "grid dimension {k}: resolution must be at least 2"
                )));
            }
        }
        Ok(Self { lower, upper, resolution })
    }

    /// One-dimensional grid on `[lo, hi]` with `n` nodes.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo], vec![hi], vec![n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn n_points(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self, k: usize) -> f64 {
        (self.upper[k] - self.lower[k]) / (self.resolution[k] - 1) as f64
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinates of the nodes along dimension `k`.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        let h = self.spacing(k);
        (0..self.resolution[k])
            .map(|j| {
                if j + 1 == self.resolution[k] {
                    self.upper[k]
                } else {
                    self.lower[k] + j as f64 * h
                }
            })
            .collect()
    }

    /// Multi-index of a flat node index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.resolution[k];
            flat /= self.resolution[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                if j + 1 == self.resolution[k] {
                    self.upper[k]
                } else {
                    self.lower[k] + j as f64 * self.spacing(k)
                }
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.n_points()).map(|i| self.point(i)).collect()
    }

    /// One-dimensional trapezoid weights along dimension `k`.
    pub fn axis_weights(&self, k: usize) -> Vec<f64> {
        let n = self.resolution[k];
        let h = self.spacing(k);
        (0..n)
            .map(|j| if j == 0 || j + 1 == n { 0.5 * h } else { h })
            .collect()
    }

    /// Tensor trapezoid quadrature weights; they sum to the domain volume.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|k| self.axis_weights(k)).collect();
        (0..self.n_points())
            .map(|i| {
                self.multi_index(i)
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| axes[k][j])
                    .product()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(k, &v)| v >= self.lower[k] && v <= self.upper[k])
    }

    /// Multilinear interpolation stencil: nodes and weights that reproduce `f(x)`.
    pub fn stencil(&self, x: &[f64]) -> Result<Stencil> {
        if !self.contains(x) {
            return Err(Error::Domain(format!("covariate {x:?} outside the grid box")));
        }
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0f64; d];
        for k in 0..d {
            let n = self.resolution[k];
            let s = (x[k] - self.lower[k]) / self.spacing(k);
            let j = (s.floor() as usize).min(n - 2);
            base[k] = j;
            frac[k] = (s - j as f64).clamp(0.0, 1.0);
        }
        let mut entries = Vec::with_capacity(1 << d);
        let mut idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            for k in 0..d {
                let up = (corner >> k) & 1 == 1;
                idx[k] = base[k] + usize::from(up);
                w *= if up { frac[k] } else { 1.0 - frac[k] };
            }
            if w != 0.0 {
                entries.push((self.flat_index(&idx), w));
            }
        }
        Ok(Stencil { entries })
    }
}

/// Nodes and multilinear weights for one evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub entries: Vec<(usize, f64)>,
}

impl Stencil {
    /// Interpolates node-major values with `width` components into `out`.
    pub fn apply(&self, values: &[f64], width: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(node, w) in &self.entries {
            let row = &values[node * width..(node + 1) * width];
            for (o, v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
}

/// A vector-valued function `θ: 𝒳 → R^{d_p}` stored at the grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: GridSpec,
    width: usize,
    values: Vec<f64>,
}

impl GridFunction {
    /// `values` is node-major: `values[node * width + component]`.
    pub fn new(grid: GridSpec, width: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidInput("grid function needs at least one component".into()));
        }
        if values.len() != grid.n_points() * width {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.n_points() * width,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at flat index {i}")));
        }
        Ok(Self { grid, width, values })
    }

    pub fn zeros(grid: GridSpec, width: usize) -> Self {
        let n = grid.n_points() * width;
        Self { grid, width, values: vec![0.0; n] }
    }

    pub fn constant(grid: GridSpec, c: &[f64]) -> Self {
        let values = (0..grid.n_points()).flat_map(|_| c.iter().copied()).collect();
        Self { grid, width: c.len(), values }
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: GridSpec, width: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut values = Vec::with_capacity(grid.n_points() * width);
        for i in 0..grid.n_points() {
            let v = f(&grid.point(i))?;
            if v.len() != width {
                return Err(Error::GridMismatch(format!(
                    "function returned {} components, expected {width}",
                    v.len()
                )));
            }
            values.extend(v);
        }
        Self::new(grid, width, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().skip(c).step_by(self.width).copied().collect()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.width];
        self.grid.stencil(x)?.apply(&self.values, self.width, &mut out);
        Ok(out)
    }

    pub fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid || self.width != other.width {
            return Err(Error::GridMismatch(
                "grid functions live on different grids or have different widths".into(),
            ));
        }
        Ok(())
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid.clone(), width: self.width, values })
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, c: f64, other: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Self { grid: self.grid.clone(), width: self.width, values })
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        Self {
            grid: self.grid.clone(),
            width: self.width,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Re-samples onto another grid by multilinear interpolation.
    pub fn resample(&self, grid: &GridSpec) -> Result<GridFunction> {
        let width = self.width;
        GridFunction::from_fn(grid.clone(), width, |x| self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_weights_sum_to_volume() {
        let g = GridSpec::new(vec![0.0, -1.0], vec![2.0, 1.5], vec![5, 7]).unwrap();
        let s: f64 = g.quadrature_weights().iter().sum();
        assert!((s - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::interval(1.0, 1.0, 5).is_err());
        assert!(GridSpec::interval(0.0, 1.0, 1).is_err());
        assert!(GridSpec::new(vec![0.0], vec![1.0, 2.0], vec![3]).is_err());
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let g = GridSpec::new(vec![0.0; 3], vec![1.0; 3], vec![3, 4, 5]).unwrap();
        for i in 0..g.n_points() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
        assert_eq!(g.point(g.n_points() - 1), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn interpolation_reproduces_multilinear_functions() {
        let g = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![4, 3]).unwrap();
        let f = |x: &[f64]| vec![1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]];
        let gf = GridFunction::from_fn(g, 1, |x| Ok(f(x))).unwrap();
        for x in [[0.1, 0.3], [0.77, 1.9], [1.0, 2.0], [0.0, 0.0]] {
            let v = gf.eval(&x).unwrap()[0];
            assert!((v - f(&x)[0]).abs() < 1e-12);
        }
        assert!(gf.eval(&[1.1, 0.0]).is_err());
    }

    #[test]
    fn refinement_preserves_multilinear_values() {
        let coarse = GridSpec::interval(0.0, 1.0, 5).unwrap();
        let fine = GridSpec::interval(0.0, 1.0, 17).unwrap();
        let gf = GridFunction::from_fn(coarse, 2, |x| Ok(vec![x[0] * x[0], -x[0]])).unwrap();
        let refined = gf.resample(&fine).unwrap();
        for x in [0.05, 0.33, 0.5, 0.91] {
            let a = gf.eval(&[x]).unwrap();
            let b = refined.eval(&[x]).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }
}
