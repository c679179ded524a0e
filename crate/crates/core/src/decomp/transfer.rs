//! Transfer operators: the exact doubling operator and a grid discretisation
//! of the operator of the induced LSV map.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DecompError, ForwardMap, Function, GridFunction};
use crate::dynsys::{lsv_lower_inverse, InducedMap};

pub const DEFAULT_GRID: usize = 4096;
pub const DEFAULT_BRANCH_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_BRANCHES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    ExactDoubling,
    GridGibbsMarkov { grid: usize, branches: usize },
}

/// Transfer operator `P` with respect to the invariant probability measure.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Doubling,
    Induced(Arc<InducedOperator>),
}

impl TransferOperator {
    pub fn exact_doubling() -> Self {
        Self {
            kind: Kind::Doubling,
        }
    }

    /// Discretised operator of the first-return map on `Y = (1/2, 1]` with
    /// `grid` cells, keeping branches until the Lebesgue tail drops below
    /// the default cutoff.
    pub fn induced_lsv(induced: InducedMap, grid: usize) -> Result<Self, DecompError> {
        Self::induced_lsv_with(induced, grid, DEFAULT_BRANCH_TOL, DEFAULT_MAX_BRANCHES)
    }

    pub fn induced_lsv_with(
        induced: InducedMap,
        grid: usize,
        branch_tol: f64,
        max_branches: usize,
    ) -> Result<Self, DecompError> {
        let op = InducedOperator::build(induced, grid, branch_tol, max_branches)?;
        Ok(Self {
            kind: Kind::Induced(Arc::new(op)),
        })
    }

    pub fn mode(&self) -> TransferMode {
        match &self.kind {
            Kind::Doubling => TransferMode::ExactDoubling,
            Kind::Induced(op) => TransferMode::GridGibbsMarkov {
                grid: op.grid,
                branches: op.branches,
            },
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            Kind::Doubling => "exact_doubling".into(),
            Kind::Induced(op) => format!(
                "grid_gibbs_markov(gamma={}, G={}, J={})",
                op.induced.gamma(),
                op.grid,
                op.branches
            ),
        }
    }

    /// Lebesgue mass of the discarded branches relative to `|Y|`; zero for
    /// the doubling operator.
    pub fn tail_mass(&self) -> f64 {
        match &self.kind {
            Kind::Doubling => 0.0,
            Kind::Induced(op) => op.tail_mass,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Doubling => (0.0, 1.0),
            Kind::Induced(_) => (0.5, 1.0),
        }
    }

    pub fn forward(&self) -> ForwardMap {
        match &self.kind {
            Kind::Doubling => ForwardMap::Doubling,
            Kind::Induced(op) => ForwardMap::Induced(op.induced),
        }
    }

    pub(crate) fn induced_operator(&self) -> Option<&InducedOperator> {
        match &self.kind {
            Kind::Doubling => None,
            Kind::Induced(op) => Some(op),
        }
    }

    /// Density of the invariant measure at the grid nodes (induced operator).
    pub fn invariant_density(&self) -> Option<GridFunction> {
        self.induced_operator()
            .map(|op| op.template().with_values(1, op.density.clone()))
    }

    pub fn apply(&self, f: &Function) -> Result<Function, DecompError> {
        match (&self.kind, f) {
            (_, Function::Constant(c)) => Ok(Function::Constant(c.clone())),
            (_, Function::Linear(terms)) => terms
                .iter()
                .map(|(c, g)| Ok((*c, self.apply(g)?)))
                .collect::<Result<_, _>>()
                .map(Function::Linear),
            (Kind::Doubling, Function::Trig(ps)) => Ok(Function::Trig(
                ps.iter().map(|p| p.transfer_doubling()).collect(),
            )),
            (Kind::Doubling, Function::Grid(g)) => Ok(Function::Grid(doubling_on_grid(g)?)),
            // P(g∘T) = g.
            (
                Kind::Doubling,
                Function::Pullback {
                    inner,
                    map: ForwardMap::Doubling,
                },
            )
            | (
                Kind::Induced(_),
                Function::Pullback {
                    inner,
                    map: ForwardMap::Induced(_),
                },
            ) => Ok((**inner).clone()),
            (Kind::Doubling, Function::Pullback { .. }) => Err(DecompError::Unsupported(
                "doubling transfer operator applied to an induced pullback",
            )),
            (Kind::Induced(op), other) => {
                let g = op.tabulate(other)?;
                Ok(Function::Grid(
                    g.with_values(g.dim(), op.apply_nodes(g.values(), g.dim())),
                ))
            }
        }
    }

    /// `∫ f dμ`: exact for closed forms under the doubling map, trapezoid
    /// for grids, and the stationary weights of the discretised operator for
    /// the induced map.
    pub fn integrate(&self, f: &Function) -> Result<Vec<f64>, DecompError> {
        match (&self.kind, f) {
            (_, Function::Constant(c)) => Ok(c.clone()),
            (_, Function::Linear(terms)) => {
                let mut acc = vec![0.0; f.dim()];
                for (c, g) in terms {
                    for (a, v) in acc.iter_mut().zip(self.integrate(g)?) {
                        *a += c * v;
                    }
                }
                Ok(acc)
            }
            (
                Kind::Doubling,
                Function::Pullback {
                    inner,
                    map: ForwardMap::Doubling,
                },
            )
            | (
                Kind::Induced(_),
                Function::Pullback {
                    inner,
                    map: ForwardMap::Induced(_),
                },
            ) => self.integrate(inner),
            (Kind::Doubling, Function::Trig(ps)) => Ok(ps.iter().map(|p| p.mean()).collect()),
            (Kind::Doubling, Function::Grid(g)) => {
                check_unit_interval(g)?;
                Ok(g.mean())
            }
            (Kind::Doubling, Function::Pullback { .. }) => Err(DecompError::Unsupported(
                "doubling invariant measure applied to an induced pullback",
            )),
            (Kind::Induced(op), other) => {
                let g = op.tabulate(other)?;
                Ok(op.mean_nodes(g.values(), g.dim()))
            }
        }
    }

    /// Tabulates `f` on the operator's grid (`cells` nodes on `[0, 1]` for
    /// the doubling operator).
    pub fn tabulate(&self, f: &Function, cells: usize) -> Result<GridFunction, DecompError> {
        match &self.kind {
            Kind::Doubling => match f {
                Function::Grid(g) if g.lo() == 0.0 && g.hi() == 1.0 => Ok(g.clone()),
                _ => tabulate_on(f, 0.0, 1.0, cells),
            },
            Kind::Induced(op) => op.tabulate(f),
        }
    }
}

fn check_unit_interval(g: &GridFunction) -> Result<(), DecompError> {
    if g.lo() != 0.0 || g.hi() != 1.0 {
        return Err(DecompError::BadGrid(
            "doubling operator needs a grid on [0, 1]",
        ));
    }
    Ok(())
}

pub(crate) fn tabulate_on(
    f: &Function,
    lo: f64,
    hi: f64,
    cells: usize,
) -> Result<GridFunction, DecompError> {
    let dim = f.dim();
    let h = (hi - lo) / cells as f64;
    let mut values = vec![0.0; (cells + 1) * dim];
    for (i, chunk) in values.chunks_mut(dim).enumerate() {
        let x = if i == cells { hi } else { lo + i as f64 * h };
        f.try_eval_into(x, chunk)?;
    }
    GridFunction::new(lo, hi, cells, dim, values)
}

/// `(Pg)(x) = ½[g(x/2) + g((x+1)/2)]` at the nodes, exact for the interpolant.
pub(crate) fn doubling_on_grid(g: &GridFunction) -> Result<GridFunction, DecompError> {
    check_unit_interval(g)?;
    let dim = g.dim();
    let mut values = vec![0.0; g.values().len()];
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    for (i, chunk) in values.chunks_mut(dim).enumerate() {
        let x = g.node(i);
        g.eval_into(0.5 * x, &mut a);
        g.eval_into(0.5 * (x + 1.0), &mut b);
        for c in 0..dim {
            chunk[c] = 0.5 * (a[c] + b[c]);
        }
    }
    Ok(g.with_values(dim, values))
}

/// Markov matrix of the induced transfer operator on the `Y`-grid.
///
/// The Lebesgue operator `(Lw)(t) = Σ_j w(y_j)/|F'(y_j)|` is assembled with
/// linear interpolation of each preimage `y_j` onto the grid; branches past
/// `J` are lumped onto the node at `1/2`, where they accumulate. With `h` the
/// fixed point of `L`, `P = h⁻¹ L h` is row-stochastic, and its stationary
/// vector gives the quadrature weights for `μ_Y`, so `∫Pw = ∫w` holds to
/// rounding.
#[derive(Debug)]
pub(crate) struct InducedOperator {
    induced: InducedMap,
    grid: usize,
    branches: usize,
    tail_mass: f64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
    density: Vec<f64>,
    stationary: Vec<f64>,
}

impl InducedOperator {
    fn build(
        induced: InducedMap,
        grid: usize,
        branch_tol: f64,
        max_branches: usize,
    ) -> Result<Self, DecompError> {
        if grid < 2 || max_branches == 0 {
            return Err(DecompError::BadGrid(
                "induced operator needs at least 2 cells and 1 branch",
            ));
        }
        let gamma = induced.gamma();
        let bounds = induced.branch_boundaries(max_branches);
        let branches = (1..=max_branches)
            .find(|&j| bounds[j] < branch_tol)
            .unwrap_or(max_branches);
        let tail_mass = bounds[branches];

        let rows: Vec<Vec<(u32, f64)>> = (0..=grid)
            .into_par_iter()
            .map(|i| {
                let t = if i == grid {
                    1.0
                } else {
                    0.5 + i as f64 / (2 * grid) as f64
                };
                let mut entries: Vec<(u32, f64)> = Vec::with_capacity(2 * branches + 1);
                let mut z = t;
                let mut deriv = 1.0;
                for j in 1..=branches {
                    if j > 1 {
                        z = lsv_lower_inverse(gamma, z);
                        deriv *= 1.0 + (1.0 + gamma) * (2.0 * z).powf(gamma);
                    }
                    let y = 0.5 * (z + 1.0);
                    let w = 0.5 / deriv;
                    let s = ((y - 0.5) * (2 * grid) as f64).clamp(0.0, grid as f64);
                    let k = (s as usize).min(grid - 1);
                    let frac = s - k as f64;
                    entries.push((k as u32, w * (1.0 - frac)));
                    entries.push((k as u32 + 1, w * frac));
                }
                entries.push((0, tail_mass));
                entries.sort_unstable_by_key(|e| e.0);
                let mut merged: Vec<(u32, f64)> = Vec::new();
                for (c, w) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += w,
                        _ if w == 0.0 => {}
                        _ => merged.push((c, w)),
                    }
                }
                merged
            })
            .collect();

        let mut row_ptr = Vec::with_capacity(grid + 2);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            for &(c, w) in row {
                cols.push(c);
                weights.push(w);
            }
            row_ptr.push(cols.len());
        }

        let mut op = Self {
            induced,
            grid,
            branches,
            tail_mass,
            row_ptr,
            cols,
            weights,
            density: Vec::new(),
            stationary: Vec::new(),
        };
        op.density = op.lebesgue_fixed_point()?;
        op.conjugate();
        op.stationary = op.stationary_vector()?;
        log::debug!(
            "induced operator: G={grid}, J={branches}, tail={tail_mass:.3e}, nnz={}",
            op.weights.len()
        );
        Ok(op)
    }

    fn template(&self) -> GridFunction {
        GridFunction::new(0.5, 1.0, self.grid, 1, vec![0.0; self.grid + 1]).expect("valid grid")
    }

    fn trapezoid_mean(&self, v: &[f64]) -> f64 {
        let g = self.grid;
        (0.5 * (v[0] + v[g]) + v[1..g].iter().sum::<f64>()) / g as f64
    }

    fn lebesgue_fixed_point(&self) -> Result<Vec<f64>, DecompError> {
        let mut h = vec![1.0; self.grid + 1];
        for _ in 0..10_000 {
            let mut next = self.apply_nodes(&h, 1);
            let norm = self.trapezoid_mean(&next);
            next.iter_mut().for_each(|v| *v /= norm);
            let diff = next
                .iter()
                .zip(&h)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            h = next;
            if diff < 1e-14 {
                return Ok(h);
            }
        }
        Err(DecompError::NotConverged {
            terms: 10_000,
            norm: f64::NAN,
        })
    }

    /// `P_ik = L_ik h_k / h_i`, rows renormalised to sum to one.
    fn conjugate(&mut self) {
        for i in 0..=self.grid {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut sum = 0.0;
            for e in range.clone() {
                self.weights[e] *= self.density[self.cols[e] as usize];
                sum += self.weights[e];
            }
            for e in range {
                self.weights[e] /= sum;
            }
        }
    }

    fn stationary_vector(&self) -> Result<Vec<f64>, DecompError> {
        let n = self.grid + 1;
        let mut pi: Vec<f64> = (0..n)
            .map(|i| {
                let w = if i == 0 || i == self.grid { 0.5 } else { 1.0 };
                w * self.density[i]
            })
            .collect();
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= total);
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                    next[self.cols[e] as usize] += pi[i] * self.weights[e];
                }
            }
            let total: f64 = next.iter().sum();
            next.iter_mut().for_each(|p| *p /= total);
            let diff = next
                .iter()
                .zip(&pi)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            pi = next;
            if diff < 1e-16 {
                return Ok(pi);
            }
        }
        Err(DecompError::NotConverged {
            terms: 10_000,
            norm: f64::NAN,
        })
    }

    /// Row-wise product with node-major values of dimension `dim`.
    pub(crate) fn apply_nodes(&self, values: &[f64], dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (i, chunk) in out.chunks_mut(dim).enumerate() {
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.cols[e] as usize;
                let w = self.weights[e];
                for c in 0..dim {
                    chunk[c] += w * values[k * dim + c];
                }
            }
        }
        out
    }

    pub(crate) fn mean_nodes(&self, values: &[f64], dim: usize) -> Vec<f64> {
        let mut acc = vec![0.0; dim];
        for (p, chunk) in self.stationary.iter().zip(values.chunks(dim)) {
            for c in 0..dim {
                acc[c] += p * chunk[c];
            }
        }
        acc
    }

    pub(crate) fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1])
            .map(move |e| (self.cols[e] as usize, self.weights[e]))
    }

    pub(crate) fn tabulate(&self, f: &Function) -> Result<GridFunction, DecompError> {
        match f {
            Function::Grid(g) if g.lo() == 0.5 && g.hi() == 1.0 && g.cells() == self.grid => {
                Ok(g.clone())
            }
            // The node at 1/2 is a limit point outside Y; evaluate just inside.
            _ => {
                let dim = f.dim();
                let mut values = vec![0.0; (self.grid + 1) * dim];
                let h = 0.5 / self.grid as f64;
                for (i, chunk) in values.chunks_mut(dim).enumerate() {
                    let x = match i {
                        0 => 0.5 + 1e-3 * h,
                        i if i == self.grid => 1.0,
                        i => 0.5 + i as f64 * h,
                    };
                    f.try_eval_into(x, chunk)?;
                }
                GridFunction::new(0.5, 1.0, self.grid, dim, values)
            }
        }
    }
}
