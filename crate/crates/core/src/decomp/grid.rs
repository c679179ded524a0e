//! Tabulated `ℝᴺ`-valued functions on a uniform grid with linear interpolation.

use serde::{Deserialize, Serialize};

use super::DecompError;
use crate::Observable;

/// Node values on `lo + i·(hi - lo)/cells`, `i = 0..=cells`, stored node-major.
/// The value at `hi` is the left limit there; cells are otherwise left-closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    lo: f64,
    hi: f64,
    cells: usize,
    dim: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        lo: f64,
        hi: f64,
        cells: usize,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self, DecompError> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || cells == 0 || dim == 0 {
            return Err(DecompError::BadGrid(
                "need lo < hi, cells >= 1 and dim >= 1",
            ));
        }
        if values.len() != (cells + 1) * dim {
            return Err(DecompError::Dimension {
                expected: (cells + 1) * dim,
                got: values.len(),
            });
        }
        Ok(Self {
            lo,
            hi,
            cells,
            dim,
            values,
        })
    }

    pub fn from_fn(
        lo: f64,
        hi: f64,
        cells: usize,
        dim: usize,
        mut f: impl FnMut(f64, &mut [f64]),
    ) -> Result<Self, DecompError> {
        let mut values = vec![0.0; (cells + 1) * dim];
        let h = (hi - lo) / cells as f64;
        for (i, chunk) in values.chunks_mut(dim).enumerate() {
            f(if i == cells { hi } else { lo + i as f64 * h }, chunk);
        }
        Self::new(lo, hi, cells, dim, values)
    }

    pub fn sample(lo: f64, hi: f64, cells: usize, v: &dyn Observable) -> Result<Self, DecompError> {
        Self::from_fn(lo, hi, cells, v.dim(), |x, out| v.eval_into(x, out))
    }

    /// Same grid, new values.
    pub(crate) fn with_values(&self, dim: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), (self.cells + 1) * dim);
        Self {
            lo: self.lo,
            hi: self.hi,
            cells: self.cells,
            dim,
            values,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells).map(|i| self.node(i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node_values(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.cells == other.cells
    }

    /// Cell index and interpolation weight of `x`, clamped into the domain.
    #[inline]
    pub(crate) fn locate(&self, x: f64) -> (usize, f64) {
        let s =
            ((x - self.lo) / (self.hi - self.lo) * self.cells as f64).clamp(0.0, self.cells as f64);
        let i = (s as usize).min(self.cells - 1);
        (i, s - i as f64)
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let (i, t) = self.locate(x);
        let a = self.node_values(i);
        let b = self.node_values(i + 1);
        for c in 0..self.dim {
            out[c] = (1.0 - t) * a[c] + t * b[c];
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Trapezoid rule, exact for the interpolant; normalised by the domain length.
    pub fn mean(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for i in 0..=self.cells {
            let w = if i == 0 || i == self.cells { 0.5 } else { 1.0 };
            for (acc, v) in s.iter_mut().zip(self.node_values(i)) {
                *acc += w * v;
            }
        }
        s.iter().map(|v| v / self.cells as f64).collect()
    }

    /// Sup norm of the interpolant over all components.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_is_exact_on_affine_functions() {
        let g = GridFunction::from_fn(0.0, 1.0, 8, 2, |x, out| {
            out[0] = 3.0 * x - 1.0;
            out[1] = -x;
        })
        .unwrap();
        for x in [0.0, 0.013, 0.5, 0.77, 1.0] {
            let v = g.eval(x);
            assert!((v[0] - (3.0 * x - 1.0)).abs() < 1e-14);
            assert!((v[1] + x).abs() < 1e-14);
        }
        let m = g.mean();
        assert!((m[0] - 0.5).abs() < 1e-14 && (m[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridFunction::new(0.0, 1.0, 4, 1, vec![0.0; 4]).is_err());
        assert!(GridFunction::new(1.0, 1.0, 4, 1, vec![0.0; 5]).is_err());
    }
}
