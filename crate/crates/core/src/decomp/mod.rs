//! Martingale–coboundary decompositions `v = m + χ∘T − χ` through the
//! transfer operator, the limiting covariance `Σ = ∫ m mᵀ`, the secondary
//! decomposition used by the variance process, and a Green–Kubo estimator
//! of `Σ` from a single long orbit.

mod flow;
mod function;
mod grid;
mod transfer;
mod trig;

pub use flow::FlowDecomposition;
pub use function::{ForwardMap, Function};
pub use grid::GridFunction;
pub use transfer::{
    TransferMode, TransferOperator, DEFAULT_BRANCH_TOL, DEFAULT_GRID, DEFAULT_MAX_BRANCHES,
};
pub use trig::TrigPoly;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynsys::{DynError, OrbitSampler};
use crate::suspension::SuspensionError;
use crate::Observable;
use transfer::doubling_on_grid;

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("‖Pᵏv‖ stopped decreasing at k = {k} (norm {norm:.3e}); is v mean-zero?")]
    NoDecay { k: usize, norm: f64 },
    #[error("series not below tolerance after {terms} terms (norm {norm:.3e})")]
    NotConverged { terms: usize, norm: f64 },
    #[error("observable has mean {mean:?}, expected zero")]
    NotMeanZero { mean: Vec<f64> },
    #[error("invalid grid: {0}")]
    BadGrid(&'static str),
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("orbit of length {orbit_len} too short for lag {max_lag}")]
    OrbitTooShort { orbit_len: usize, max_lag: usize },
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    Suspension(#[from] SuspensionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompOptions {
    /// Stop once `‖Pᵏv‖∞` falls below this.
    pub tol: f64,
    pub max_terms: usize,
    /// Consecutive non-decreasing norms that count as no decay.
    pub stall_window: usize,
    /// Reject observables whose quadrature mean exceeds this; `None` skips
    /// the check.
    pub mean_tol: Option<f64>,
    /// Remove the quadrature mean before summing the series.
    pub center: bool,
    /// Grid size when a closed form must be tabulated for the doubling map.
    pub cells: usize,
}

impl Default for DecompOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_terms: 200,
            stall_window: 50,
            mean_tol: Some(1e-8),
            center: true,
            cells: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// The observable after removing `mean_removed`.
    pub v: Function,
    pub chi: Function,
    pub m: Function,
    pub sigma: Vec<Vec<f64>>,
    /// `‖Pm‖∞`.
    pub residual: f64,
    pub truncation_k: usize,
    pub mean_removed: Vec<f64>,
    /// `max |∫P(mmᵀ) − Σ|` under the operator's own quadrature; zero for
    /// closed forms.
    pub sigma_gap: f64,
    mode: TransferMode,
    label: String,
    tail_mass: f64,
    /// `P(mmᵀ)`, flattened row-major to `N²` components.
    q: Function,
    q_mean: Vec<f64>,
}

impl Decomposition {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn mode(&self) -> TransferMode {
        self.mode
    }

    pub fn record(&self) -> Result<DecompositionRecord, DecompError> {
        let grid = match (&self.v, self.mode) {
            (Function::Trig(_), _) => GridFunction::new(0.0, 1.0, 2048, 1, vec![0.0; 2049])?,
            (Function::Grid(g), _) => g.clone(),
            _ => return Err(DecompError::Unsupported("record of a composite observable")),
        };
        let nodes = grid.nodes();
        let sample = |f: &Function| -> Vec<Vec<f64>> { nodes.iter().map(|&x| f.eval(x)).collect() };
        let trig = match (&self.v, &self.chi, &self.m) {
            (Function::Trig(v), Function::Trig(chi), Function::Trig(m)) => Some(TrigRecord {
                v: v.clone(),
                chi: chi.clone(),
                m: m.clone(),
            }),
            _ => None,
        };
        Ok(DecompositionRecord {
            operator: self.label.clone(),
            mode: self.mode,
            tail_mass: self.tail_mass,
            dim: self.dim(),
            grid: nodes.clone(),
            v: sample(&self.v),
            chi: sample(&self.chi),
            m: sample(&self.m),
            sigma: self.sigma.clone(),
            residual: self.residual,
            truncation_k: self.truncation_k,
            mean_removed: self.mean_removed.clone(),
            sigma_gap: self.sigma_gap,
            trig,
        })
    }

    pub fn to_json(&self) -> Result<String, DecompError> {
        Ok(serde_json::to_string_pretty(&self.record()?).expect("record serialises"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigRecord {
    pub v: Vec<TrigPoly>,
    pub chi: Vec<TrigPoly>,
    pub m: Vec<TrigPoly>,
}

/// Serialisable snapshot of a [`Decomposition`]; node values are
/// `values[node][component]`, with `m` undefined (`null`) where the induced
/// return time overflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub operator: String,
    pub mode: TransferMode,
    pub tail_mass: f64,
    pub dim: usize,
    pub grid: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub chi: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub residual: f64,
    pub truncation_k: usize,
    pub mean_removed: Vec<f64>,
    pub sigma_gap: f64,
    pub trig: Option<TrigRecord>,
}

pub fn apply_transfer(op: &TransferOperator, v: &Function) -> Result<Function, DecompError> {
    op.apply(v)
}

pub fn primary_decomposition(
    op: &TransferOperator,
    v: &Function,
    tol: f64,
) -> Result<Decomposition, DecompError> {
    primary_decomposition_with(
        op,
        v,
        &DecompOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn primary_decomposition_with(
    op: &TransferOperator,
    v: &Function,
    opts: &DecompOptions,
) -> Result<Decomposition, DecompError> {
    if v.dim() == 0 {
        return Err(DecompError::Dimension {
            expected: 1,
            got: 0,
        });
    }
    let mean = op.integrate(v)?;
    if let Some(limit) = opts.mean_tol {
        if mean.iter().any(|m| !(m.abs() < limit)) {
            return Err(DecompError::NotMeanZero { mean });
        }
    }
    let removed = if opts.center {
        mean
    } else {
        vec![0.0; v.dim()]
    };
    let mut d = match (op.mode(), v) {
        (TransferMode::ExactDoubling, Function::Trig(ps)) => {
            trig_decomposition(ps, &removed, opts)?
        }
        (TransferMode::ExactDoubling, _) => {
            let g = op.tabulate(v, opts.cells)?;
            doubling_grid_decomposition(&center_grid(&g, &removed), opts)?
        }
        (TransferMode::GridGibbsMarkov { .. }, _) => {
            let g = op.tabulate(v, opts.cells)?;
            induced_decomposition(op, &center_grid(&g, &removed), opts)?
        }
    };
    d.mean_removed = removed;
    d.mode = op.mode();
    d.label = op.label();
    d.tail_mass = op.tail_mass();
    Ok(d)
}

fn center_grid(g: &GridFunction, mean: &[f64]) -> GridFunction {
    let dim = g.dim();
    let values = g
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v - mean[i % dim])
        .collect();
    g.with_values(dim, values)
}

/// `χ = Σ_{k=1..K} Pᵏv` with `‖P^{K+1}v‖ < tol`; returns `(χ, K)`.
fn series<T>(
    v: &T,
    zero: T,
    apply: impl Fn(&T) -> T,
    norm: impl Fn(&T) -> f64,
    add: impl Fn(&mut T, &T),
    opts: &DecompOptions,
) -> Result<(T, usize), DecompError> {
    let mut chi = zero;
    let mut w = apply(v);
    let mut prev = norm(v);
    let mut stall = 0;
    let mut k = 0;
    loop {
        let n = norm(&w);
        if n < opts.tol {
            return Ok((chi, k));
        }
        if k >= opts.max_terms {
            return Err(DecompError::NotConverged { terms: k, norm: n });
        }
        if n >= prev {
            stall += 1;
            if stall >= opts.stall_window {
                return Err(DecompError::NoDecay { k: k + 1, norm: n });
            }
        } else {
            stall = 0;
        }
        prev = n;
        add(&mut chi, &w);
        w = apply(&w);
        k += 1;
    }
}

fn finish(
    v: Function,
    chi: Function,
    m: Function,
    sigma: Vec<Vec<f64>>,
    residual: f64,
    truncation_k: usize,
    q: Function,
    q_mean: Vec<f64>,
) -> Decomposition {
    let dim = sigma.len();
    let sigma_gap = (0..dim * dim).fold(0.0f64, |g, e| {
        g.max((q_mean[e] - sigma[e / dim][e % dim]).abs())
    });
    Decomposition {
        v,
        chi,
        m,
        sigma,
        residual,
        truncation_k,
        mean_removed: Vec::new(),
        sigma_gap,
        mode: TransferMode::ExactDoubling,
        label: String::new(),
        tail_mass: 0.0,
        q,
        q_mean,
    }
}

fn trig_decomposition(
    ps: &[TrigPoly],
    mean: &[f64],
    opts: &DecompOptions,
) -> Result<Decomposition, DecompError> {
    let dim = ps.len();
    let v: Vec<TrigPoly> = ps
        .iter()
        .zip(mean)
        .map(|(p, c)| p - &TrigPoly::constant(*c))
        .collect();
    let (chi, k) = series(
        &v,
        vec![TrigPoly::zero(); dim],
        |w| w.iter().map(|p| p.transfer_doubling()).collect(),
        |w| w.iter().fold(0.0f64, |m, p| m.max(p.abs_sum())),
        |acc, w| {
            for (a, b) in acc.iter_mut().zip(w) {
                *a = &*a + b;
            }
        },
        opts,
    )?;
    let m: Vec<TrigPoly> = (0..dim)
        .map(|c| &(&v[c] - &chi[c].compose_doubling()) + &chi[c])
        .collect();
    let residual = m
        .iter()
        .fold(0.0f64, |r, p| r.max(p.transfer_doubling().abs_sum()));
    let sigma: Vec<Vec<f64>> = (0..dim)
        .map(|a| (0..dim).map(|b| m[a].inner(&m[b])).collect())
        .collect();
    let q: Vec<TrigPoly> = (0..dim * dim)
        .map(|e| m[e / dim].product(&m[e % dim]).transfer_doubling())
        .collect();
    let q_mean = q.iter().map(|p| p.mean()).collect();
    Ok(finish(
        Function::Trig(v),
        Function::Trig(chi),
        Function::Trig(m),
        sigma,
        residual,
        k,
        Function::Trig(q),
        q_mean,
    ))
}

fn doubling_grid_decomposition(
    v: &GridFunction,
    opts: &DecompOptions,
) -> Result<Decomposition, DecompError> {
    let dim = v.dim();
    let g = v.cells();
    let zero = v.with_values(dim, vec![0.0; v.values().len()]);
    let (chi, k) = series(
        v,
        zero,
        |w| doubling_on_grid(w).expect("unit-interval grid"),
        |w| w.sup_norm(),
        |acc, w| {
            let values = acc
                .values()
                .iter()
                .zip(w.values())
                .map(|(a, b)| a + b)
                .collect();
            *acc = acc.with_values(dim, values);
        },
        opts,
    )?;

    // On the half-cells z_j = j/(2G) every term of m is linear, and χ∘T
    // jumps only at 1/2, so m is tabulated by its right values and left
    // limits there.
    let half = 2 * g;
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut base = vec![0.0; (half + 1) * dim];
    for j in 0..=half {
        let z = j as f64 / half as f64;
        v.eval_into(z, &mut a);
        chi.eval_into(z, &mut b);
        for c in 0..dim {
            base[j * dim + c] = a[c] + b[c];
        }
    }
    let m_at = |j: usize, node: usize, c: usize| base[j * dim + c] - chi.node_values(node)[c];
    let right = |j: usize, c: usize| m_at(j, if j < g { j } else { j - g }, c);
    let left = |j: usize, c: usize| m_at(j, if j <= g { j } else { j - g }, c);

    let h = 1.0 / half as f64;
    let mut sigma = vec![vec![0.0; dim]; dim];
    for j in 0..half {
        for p in 0..dim {
            for r in 0..dim {
                let (ap, ar) = (right(j, p), right(j, r));
                let (bp, br) = (left(j + 1, p), left(j + 1, r));
                sigma[p][r] += h * (ap * ar / 3.0 + (ap * br + bp * ar) / 6.0 + bp * br / 3.0);
            }
        }
    }

    // Pm and P(mmᵀ) at the G-grid nodes from the two preimages of each node.
    let mut residual = 0.0f64;
    let mut q = vec![0.0; (g + 1) * dim * dim];
    for i in 0..=g {
        let pre: [Box<dyn Fn(usize) -> f64>; 2] = if i < g {
            [Box::new(|c| right(i, c)), Box::new(|c| right(i + g, c))]
        } else {
            [Box::new(|c| left(g, c)), Box::new(|c| left(half, c))]
        };
        for c in 0..dim {
            residual = residual.max((0.5 * (pre[0](c) + pre[1](c))).abs());
        }
        for p in 0..dim {
            for r in 0..dim {
                q[(i * dim + p) * dim + r] = 0.5 * (pre[0](p) * pre[0](r) + pre[1](p) * pre[1](r));
            }
        }
    }
    let q = v.with_values(dim * dim, q);
    let q_mean = q.mean();

    let m = Function::Linear(vec![
        (1.0, Function::Grid(v.clone())),
        (1.0, Function::Grid(chi.clone())),
        (
            -1.0,
            Function::pullback(Function::Grid(chi.clone()), ForwardMap::Doubling),
        ),
    ]);
    Ok(finish(
        Function::Grid(v.clone()),
        Function::Grid(chi),
        m,
        sigma,
        residual,
        k,
        Function::Grid(q),
        q_mean,
    ))
}

fn induced_decomposition(
    op: &TransferOperator,
    v: &GridFunction,
    opts: &DecompOptions,
) -> Result<Decomposition, DecompError> {
    let inner = op.induced_operator().expect("induced operator");
    let dim = v.dim();
    let (chi, k) = series(
        &v.values().to_vec(),
        vec![0.0; v.values().len()],
        |w| inner.apply_nodes(w, dim),
        |w| w.iter().fold(0.0f64, |m, x| m.max(x.abs())),
        |acc, w| acc.iter_mut().zip(w).for_each(|(a, b)| *a += b),
        opts,
    )?;
    let pv = inner.apply_nodes(v.values(), dim);
    let pchi = inner.apply_nodes(&chi, dim);
    let residual = (0..chi.len()).fold(0.0f64, |r, e| r.max((pv[e] + pchi[e] - chi[e]).abs()));

    // m at the preimages y_j of a node t is (v + χ)(y_j) − χ(t).
    let a: Vec<f64> = v.values().iter().zip(&chi).map(|(x, y)| x + y).collect();
    let nodes = v.cells() + 1;
    let mut q = vec![0.0; nodes * dim * dim];
    let mut diff = vec![0.0; dim];
    for i in 0..nodes {
        for (kk, w) in inner.row(i) {
            for c in 0..dim {
                diff[c] = a[kk * dim + c] - chi[i * dim + c];
            }
            for p in 0..dim {
                for r in 0..dim {
                    q[(i * dim + p) * dim + r] += w * diff[p] * diff[r];
                }
            }
        }
    }
    let q_mean = inner.mean_nodes(&q, dim * dim);
    let sigma = (0..dim)
        .map(|p| (0..dim).map(|r| q_mean[p * dim + r]).collect())
        .collect();

    let chi = v.with_values(dim, chi);
    let m = Function::Linear(vec![
        (1.0, Function::Grid(v.clone())),
        (1.0, Function::Grid(chi.clone())),
        (
            -1.0,
            Function::pullback(Function::Grid(chi.clone()), op.forward()),
        ),
    ]);
    Ok(finish(
        Function::Grid(v.clone()),
        Function::Grid(chi),
        m,
        sigma,
        residual,
        k,
        Function::Grid(v.with_values(dim * dim, q)),
        q_mean,
    ))
}

/// `Φ̆ = P(mmᵀ)∘T − c`, flattened row-major to `N²` components, where `c`
/// is the mean of `P(mmᵀ)` under the operator's quadrature (equal to `Σ`
/// for closed forms; see [`Decomposition::sigma_gap`]).
pub fn secondary_decomposition(
    op: &TransferOperator,
    d: &Decomposition,
) -> Result<Function, DecompError> {
    if op.mode() != d.mode {
        return Err(DecompError::Unsupported(
            "decomposition built with a different operator",
        ));
    }
    if let Function::Trig(q) = &d.q {
        let phi = q
            .iter()
            .zip(&d.q_mean)
            .map(|(p, c)| &p.compose_doubling() - &TrigPoly::constant(*c))
            .collect();
        return Ok(Function::Trig(phi));
    }
    Ok(Function::Linear(vec![
        (1.0, Function::pullback(d.q.clone(), op.forward())),
        (-1.0, Function::Constant(d.q_mean.clone())),
    ]))
}

/// `Σ̂ = C₀ + Σ_{k=1..K}(C_k + C_kᵀ)` from one orbit of `orbit_len` points,
/// where `C_k` is the lag-`k` autocovariance normalised by `orbit_len`.
/// The result is symmetrised and negative eigenvalues are clamped to zero.
pub fn green_kubo_sigma(
    sampler: &OrbitSampler,
    v: &dyn Observable,
    max_lag: usize,
    orbit_len: usize,
) -> Result<Vec<Vec<f64>>, DecompError> {
    let profile = green_kubo_profile(sampler, v, max_lag, orbit_len)?;
    Ok(clamp_psd(profile.last().expect("lag 0 is always present")))
}

/// The truncated sums `Σ̂(L) = C₀ + Σ_{k=1..L}(C_k + C_kᵀ)` for `L = 0..=max_lag`,
/// symmetrised but not clamped.
pub fn green_kubo_profile(
    sampler: &OrbitSampler,
    v: &dyn Observable,
    max_lag: usize,
    orbit_len: usize,
) -> Result<Vec<DMatrix<f64>>, DecompError> {
    if orbit_len <= max_lag {
        return Err(DecompError::OrbitTooShort { orbit_len, max_lag });
    }
    let dim = v.dim();
    let mut stream = sampler.stream(0);
    // Component-major, so each lag product is a contiguous dot product.
    let mut series = vec![vec![0.0; orbit_len]; dim];
    let mut val = vec![0.0; dim];
    for j in 0..orbit_len {
        v.eval_into(stream.advance(), &mut val);
        for (c, x) in val.iter().enumerate() {
            series[c][j] = *x;
        }
    }
    for s in series.iter_mut() {
        let mean = s.iter().sum::<f64>() / orbit_len as f64;
        s.iter_mut().for_each(|x| *x -= mean);
    }

    let lags: Vec<DMatrix<f64>> = (0..=max_lag)
        .into_par_iter()
        .map(|k| {
            DMatrix::from_fn(dim, dim, |p, r| {
                let a = &series[p][..orbit_len - k];
                let b = &series[r][k..];
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / orbit_len as f64
            })
        })
        .collect();
    let mut total = lags[0].clone();
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push((&total + total.transpose()) * 0.5);
    for c in &lags[1..] {
        total += c + c.transpose();
        out.push((&total + total.transpose()) * 0.5);
    }
    Ok(out)
}

/// Symmetric PSD projection by eigenvalue clamping, warning when it changes
/// anything.
pub fn clamp_psd(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let out = if eig.eigenvalues.iter().any(|&l| l < 0.0) {
        log::warn!(
            "clamping negative eigenvalues {:?} of a covariance estimate",
            eig.eigenvalues.as_slice()
        );
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose()
    } else {
        m.clone()
    };
    (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (out[(i, j)] + out[(j, i)])).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::MapSystem;
    use crate::observable::scalar;
    use std::f64::consts::PI;

    fn doubling() -> TransferOperator {
        TransferOperator::exact_doubling()
    }

    fn cos(k: usize) -> Function {
        Function::scalar_trig(TrigPoly::cos(k, 1.0))
    }

    #[test]
    fn cos_2pi_is_a_martingale() {
        let d = primary_decomposition(&doubling(), &cos(1), 1e-10).unwrap();
        assert_eq!(d.truncation_k, 0);
        assert_eq!(d.chi, Function::Trig(vec![TrigPoly::zero()]));
        assert_eq!(d.m, cos(1));
        assert_eq!(d.sigma, vec![vec![0.5]]);
        assert_eq!(d.residual, 0.0);
    }

    #[test]
    fn cos_4pi_has_one_coboundary_term() {
        let d = primary_decomposition(&doubling(), &cos(2), 1e-10).unwrap();
        assert_eq!(d.truncation_k, 1);
        assert_eq!(d.chi, cos(1));
        assert_eq!(d.m, cos(1));
        assert_eq!(d.sigma, vec![vec![0.5]]);
    }

    #[test]
    fn zero_observable() {
        let d = primary_decomposition(&doubling(), &Function::scalar_trig(TrigPoly::zero()), 1e-10)
            .unwrap();
        assert_eq!(d.sigma, vec![vec![0.0]]);
        assert_eq!(d.m, Function::Trig(vec![TrigPoly::zero()]));
        let g = GridFunction::new(0.0, 1.0, 16, 1, vec![0.0; 17]).unwrap();
        let d = primary_decomposition(&doubling(), &Function::Grid(g), 1e-10).unwrap();
        assert_eq!(d.sigma, vec![vec![0.0]]);
    }

    #[test]
    fn rejects_nonzero_mean_and_detects_stall() {
        let op = doubling();
        let v = Function::scalar_trig(&TrigPoly::cos(1, 1.0) + &TrigPoly::constant(0.1));
        assert!(matches!(
            primary_decomposition(&op, &v, 1e-10),
            Err(DecompError::NotMeanZero { .. })
        ));
        // A constant survives every application of P.
        let opts = DecompOptions {
            mean_tol: None,
            center: false,
            ..Default::default()
        };
        let d = primary_decomposition_with(&op, &Function::Constant(vec![1.0]), &opts);
        assert!(
            matches!(d, Err(DecompError::NoDecay { k: 50, .. })),
            "{d:?}"
        );
    }

    #[test]
    fn secondary_examples() {
        let op = doubling();
        let d = primary_decomposition(&op, &cos(1), 1e-10).unwrap();
        let phi = secondary_decomposition(&op, &d).unwrap();
        assert_eq!(phi, Function::Trig(vec![TrigPoly::cos(2, 0.5)]));

        // m ≡ 0 ⇒ Φ̆ ≡ 0.
        let d =
            primary_decomposition(&op, &Function::scalar_trig(TrigPoly::zero()), 1e-10).unwrap();
        let phi = secondary_decomposition(&op, &d).unwrap();
        assert_eq!(phi, Function::Trig(vec![TrigPoly::zero()]));
    }

    #[test]
    fn grid_decomposition_agrees_with_closed_form() {
        let op = doubling();
        let v = Function::scalar_trig(&TrigPoly::cos(2, 1.0) + &TrigPoly::sin(3, 0.5));
        let exact = primary_decomposition(&op, &v, 1e-10).unwrap();
        let g = op.tabulate(&v, 4096).unwrap();
        let d = primary_decomposition(&op, &Function::Grid(g), 1e-10).unwrap();
        assert!(d.residual < 1e-10);
        assert!((d.sigma[0][0] - exact.sigma[0][0]).abs() < 1e-5);
        assert!(d.sigma_gap < 1e-5);
        // v = m + χ∘T − χ holds at every point, including across the jump.
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let lhs = d.v.try_eval(x).unwrap()[0];
            let tx = MapSystem::doubling().apply(x);
            let rhs = d.m.try_eval(x).unwrap()[0] + d.chi.try_eval(tx).unwrap()[0]
                - d.chi.try_eval(x).unwrap()[0];
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let phi = secondary_decomposition(&op, &d).unwrap();
        assert!(op.integrate(&phi).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn vector_valued_sigma_is_symmetric_psd() {
        let op = doubling();
        let v = Function::Trig(vec![
            TrigPoly::cos(2, 1.0),
            &TrigPoly::cos(1, 1.0) + &TrigPoly::sin(4, -2.0),
        ]);
        let d = primary_decomposition(&op, &v, 1e-10).unwrap();
        let s = DMatrix::from_fn(2, 2, |i, j| d.sigma[i][j]);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
        assert!(SymmetricEigen::new(s)
            .eigenvalues
            .iter()
            .all(|&l| l >= -1e-10));
        // m = (cos 2πx, cos 2πx − 2 sin 2πx), so Σ₀₁ = ∫cos² 2πx.
        assert!((d.sigma[0][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn induced_decomposition_has_small_residual() {
        let f = crate::dynsys::InducedMap::new(MapSystem::lsv(0.25).unwrap()).unwrap();
        let op = TransferOperator::induced_lsv(f, 512).unwrap();
        let v = Function::scalar_trig(TrigPoly::cos(1, 1.0));
        let opts = DecompOptions {
            mean_tol: None,
            ..Default::default()
        };
        let d = primary_decomposition_with(&op, &v, &opts).unwrap();
        assert!(d.residual < 1e-10);
        assert!(d.sigma[0][0] > 0.0);
        assert_eq!(d.sigma_gap, 0.0);
        let phi = secondary_decomposition(&op, &d).unwrap();
        assert!(op.integrate(&phi).unwrap()[0].abs() < 1e-12);
        let rec = d.record().unwrap();
        assert_eq!(rec.grid.len(), 513);
    }

    #[test]
    fn green_kubo_doubling_examples() {
        let sampler = OrbitSampler::new(MapSystem::doubling(), 11);
        let s1 =
            green_kubo_sigma(&sampler, &scalar(|x| (2.0 * PI * x).cos()), 30, 1_000_000).unwrap();
        assert!((s1[0][0] - 0.5).abs() < 0.01, "{s1:?}");
        let s2 =
            green_kubo_sigma(&sampler, &scalar(|x| (4.0 * PI * x).cos()), 30, 1_000_000).unwrap();
        assert!((s2[0][0] - 0.5).abs() < 0.01, "{s2:?}");
        let s0 = green_kubo_sigma(&sampler, &scalar(|_| 0.0), 5, 1000).unwrap();
        assert_eq!(s0, vec![vec![0.0]]);
    }

    #[test]
    fn json_round_trip() {
        let d = primary_decomposition(&doubling(), &cos(2), 1e-10).unwrap();
        let json = d.to_json().unwrap();
        let rec: DecompositionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(rec.sigma, vec![vec![0.5]]);
        assert_eq!(rec.truncation_k, 1);
        assert_eq!(rec.grid.len(), 2049);
        assert_eq!(rec.trig.unwrap().chi, vec![TrigPoly::cos(1, 1.0)]);
    }
}
