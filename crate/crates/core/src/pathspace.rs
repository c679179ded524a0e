//! Piecewise-linear sample paths in `C([0, 1], ℝᴺ)`: the discrete process
//! `B_n`, the flow process `W_n`, Brownian motion with covariance `Σ`, the
//! reversal `(hf)(t) = f(1) − f(1 − t)` and the exact uniform distance.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;
use crate::suspension::{FlowObservable, SuspensionError, SuspensionFlow};
use crate::Observable;

/// Default comparison grid.
pub const DEFAULT_GRID: usize = 16;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("a path needs at least 2 nodes")]
    TooFewNodes,
    #[error("nodes must increase strictly from 0 to 1")]
    BadNodes,
    #[error("expected dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("orbit has {got} points, need {needed}")]
    OrbitTooShort { needed: usize, got: usize },
    #[error("grid must have at least {min} cells, got {got}")]
    BadGrid { min: usize, got: usize },
    #[error("covariance is not positive semidefinite (projection moves it by {change:.3e})")]
    NotPsd { change: f64 },
    #[error("empty path measure")]
    Empty,
    #[error("malformed path file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Suspension(#[from] SuspensionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePath {
    nodes: Vec<f64>,
    dim: usize,
    /// Node-major.
    values: Vec<f64>,
}

impl PiecewisePath {
    pub fn new(nodes: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self, PathError> {
        if nodes.len() < 2 {
            return Err(PathError::TooFewNodes);
        }
        if nodes[0] != 0.0
            || *nodes.last().unwrap() != 1.0
            || nodes.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(PathError::BadNodes);
        }
        if dim == 0 || values.len() != nodes.len() * dim {
            return Err(PathError::Dimension {
                expected: nodes.len() * dim.max(1),
                got: values.len(),
            });
        }
        Ok(Self { nodes, dim, values })
    }

    /// Nodes `i/d`, `i = 0..=d`.
    pub fn on_grid(d: usize, dim: usize, values: Vec<f64>) -> Result<Self, PathError> {
        Self::new(grid_nodes(d), dim, values)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            nodes: vec![0.0, 1.0],
            dim,
            values: vec![0.0; 2 * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Linear interpolation; `t` is clamped into `[0, 1]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let t = t.clamp(0.0, 1.0);
        let k = self
            .nodes
            .partition_point(|&s| s <= t)
            .clamp(1, self.nodes.len() - 1)
            - 1;
        let (t0, t1) = (self.nodes[k], self.nodes[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.value(k), self.value(k + 1));
        for c in 0..self.dim {
            out[c] = a[c] + w * (b[c] - a[c]);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// The path sampled at `i/d` and re-interpolated.
    pub fn restrict(&self, d: usize) -> Result<Self, PathError> {
        if d == 0 {
            return Err(PathError::BadGrid { min: 1, got: d });
        }
        let nodes = grid_nodes(d);
        let mut values = vec![0.0; (d + 1) * self.dim];
        for (t, chunk) in nodes.iter().zip(values.chunks_mut(self.dim)) {
            self.eval_into(*t, chunk);
        }
        Ok(Self {
            nodes,
            dim: self.dim,
            values,
        })
    }

    /// `sup_t |f(t)|` with the Euclidean norm on `ℝᴺ`.
    pub fn sup_norm(&self) -> f64 {
        self.values.chunks(self.dim).map(norm).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PathError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|c| format!("v{c}")));
        wtr.write_record(&header)?;
        for (i, t) in self.nodes.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.value(i).iter().map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, PathError> {
        let mut rdr = csv::Reader::from_reader(r);
        let dim = rdr.headers()?.len().saturating_sub(1);
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(PathError::Parse(format!(
                    "row {}: expected {} fields",
                    line + 1,
                    dim + 1
                )));
            }
            let mut fields = rec.iter().map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| PathError::Parse(format!("row {}: {e}", line + 1)))
            });
            nodes.push(fields.next().unwrap()?);
            for f in fields {
                values.push(f?);
            }
        }
        Self::new(nodes, dim, values)
    }

    pub fn save(&self, path: &Path) -> Result<(), PathError> {
        self.write_csv(fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, PathError> {
        Self::read_csv(fs::File::open(path)?)
    }
}

pub(crate) fn grid_nodes(d: usize) -> Vec<f64> {
    (0..=d)
        .map(|i| if i == d { 1.0 } else { i as f64 / d as f64 })
        .collect()
}

#[inline]
fn norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// `M` equally weighted paths of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPathMeasure {
    paths: Vec<PiecewisePath>,
}

impl EmpiricalPathMeasure {
    pub fn new(paths: Vec<PiecewisePath>) -> Result<Self, PathError> {
        let first = paths.first().ok_or(PathError::Empty)?;
        if let Some(p) = paths.iter().find(|p| p.dim != first.dim) {
            return Err(PathError::Dimension {
                expected: first.dim,
                got: p.dim,
            });
        }
        Ok(Self { paths })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.paths[0].dim
    }

    pub fn paths(&self) -> &[PiecewisePath] {
        &self.paths
    }

    pub fn restrict(&self, d: usize) -> Result<Self, PathError> {
        let paths = self
            .paths
            .iter()
            .map(|p| p.restrict(d))
            .collect::<Result<_, _>>()?;
        Ok(Self { paths })
    }

    /// One `path_XXXX.csv` per path.
    pub fn save_dir(&self, dir: &Path) -> Result<(), PathError> {
        fs::create_dir_all(dir)?;
        for (i, p) in self.paths.iter().enumerate() {
            p.save(&dir.join(format!("path_{i:04}.csv")))?;
        }
        Ok(())
    }

    /// Reads every `*.csv` in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, PathError> {
        let mut files: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let paths = files
            .iter()
            .map(|f| PiecewisePath::load(f))
            .collect::<Result<_, _>>()?;
        Self::new(paths)
    }
}

/// `B_n(k/n) = n^{-1/2} Σ_{j<k} v(x_j)`, interpolated linearly.
pub fn build_bn(orbit: &[f64], v: &dyn Observable, n: usize) -> Result<PiecewisePath, PathError> {
    if n == 0 {
        return Err(PathError::BadGrid { min: 1, got: 0 });
    }
    if orbit.len() < n {
        return Err(PathError::OrbitTooShort {
            needed: n,
            got: orbit.len(),
        });
    }
    let dim = v.dim();
    let scale = 1.0 / (n as f64).sqrt();
    let mut values = vec![0.0; (n + 1) * dim];
    let mut acc = vec![0.0; dim];
    let mut vx = vec![0.0; dim];
    for (k, x) in orbit[..n].iter().enumerate() {
        v.eval_into(*x, &mut vx);
        for c in 0..dim {
            acc[c] += vx[c];
            values[(k + 1) * dim + c] = acc[c] * scale;
        }
    }
    PiecewisePath::on_grid(n, dim, values)
}

/// `W_n(i/d) = n^{-1/2} ∫₀^{n i/d} v(Ψ_s(x₀, u₀)) ds`, where `orbit` is the
/// base orbit of `x₀`.
pub fn build_wn<I>(
    flow: &SuspensionFlow,
    v: &FlowObservable,
    orbit: I,
    u0: f64,
    n: usize,
    d: usize,
    dt: f64,
) -> Result<PiecewisePath, PathError>
where
    I: IntoIterator<Item = f64>,
{
    Ok(build_wn_multi(flow, v, orbit, u0, &[n], d, dt)?
        .pop()
        .unwrap())
}

/// `W_n` for several `n` from a single pass along the same flow trajectory.
pub fn build_wn_multi<I>(
    flow: &SuspensionFlow,
    v: &FlowObservable,
    orbit: I,
    u0: f64,
    ns: &[usize],
    d: usize,
    dt: f64,
) -> Result<Vec<PiecewisePath>, PathError>
where
    I: IntoIterator<Item = f64>,
{
    if d < 2 {
        return Err(PathError::BadGrid { min: 2, got: d });
    }
    let dim = v.dim();
    let mut checkpoints: Vec<(f64, usize, usize)> = Vec::with_capacity(ns.len() * d);
    for (j, &n) in ns.iter().enumerate() {
        for i in 1..=d {
            checkpoints.push((n as f64 * i as f64 / d as f64, j, i));
        }
    }
    checkpoints.sort_by(|a, b| a.0.total_cmp(&b.0));
    let times: Vec<f64> = checkpoints.iter().map(|c| c.0).collect();
    let integrals = flow.cumulative_integrals(v, orbit, u0, &times, dt)?;
    let mut values: Vec<Vec<f64>> = ns.iter().map(|_| vec![0.0; (d + 1) * dim]).collect();
    for ((_, j, i), integral) in checkpoints.iter().zip(integrals) {
        let scale = 1.0 / (ns[*j] as f64).sqrt();
        for c in 0..dim {
            values[*j][i * dim + c] = integral[c] * scale;
        }
    }
    values
        .into_iter()
        .map(|vals| PiecewisePath::on_grid(d, dim, vals))
        .collect()
}

/// Spectral square root `A` of a covariance, `A Aᵀ = Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianFactor {
    factor: DMatrix<f64>,
}

impl BrownianFactor {
    pub fn new(sigma: &[Vec<f64>]) -> Result<Self, PathError> {
        let n = sigma.len();
        if n == 0 || sigma.iter().any(|row| row.len() != n) {
            return Err(PathError::Dimension {
                expected: n.max(1),
                got: sigma.first().map_or(0, |r| r.len()),
            });
        }
        let raw = DMatrix::from_fn(n, n, |i, j| sigma[i][j]);
        let sym = (&raw + raw.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let projected =
            &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        let change = (&projected - &raw).abs().max();
        if !(change <= 1e-6) {
            return Err(PathError::NotPsd { change });
        }
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&clamped.map(f64::sqrt));
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Cumulative sums of `d` Gaussian increments with covariance `Σ/d`.
    pub fn sample<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> PiecewisePath {
        let n = self.dim();
        let scale = 1.0 / (d as f64).sqrt();
        let mut values = vec![0.0; (d + 1) * n];
        let mut z = vec![0.0; n];
        for i in 1..=d {
            z.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
            for r in 0..n {
                let inc: f64 = (0..n).map(|c| self.factor[(r, c)] * z[c]).sum();
                values[i * n + r] = values[(i - 1) * n + r] + scale * inc;
            }
        }
        PiecewisePath {
            nodes: grid_nodes(d),
            dim: n,
            values,
        }
    }
}

/// Brownian motion with covariance `sigma` on the grid `i/d`.
pub fn sample_brownian(
    sigma: &[Vec<f64>],
    d: usize,
    seed: u64,
) -> Result<PiecewisePath, PathError> {
    if d == 0 {
        return Err(PathError::BadGrid { min: 1, got: 0 });
    }
    Ok(BrownianFactor::new(sigma)?.sample(d, &mut stream_rng(seed, 0)))
}

/// `(hf)(t) = f(1) − f(1 − t)` on the reflected node set.
pub fn h_reversal(path: &PiecewisePath) -> PiecewisePath {
    let k = path.nodes.len();
    let dim = path.dim;
    let end = path.value(k - 1).to_vec();
    let mut nodes = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k * dim);
    for j in 0..k {
        let src = k - 1 - j;
        nodes.push(match j {
            0 => 0.0,
            j if j == k - 1 => 1.0,
            _ => 1.0 - path.nodes[src],
        });
        values.extend(end.iter().zip(path.value(src)).map(|(e, v)| e - v));
    }
    PiecewisePath { nodes, dim, values }
}

/// `sup_t |a(t) − b(t)|`, attained at a node of either path because the
/// difference is linear between consecutive nodes of the union.
pub fn sup_distance(a: &PiecewisePath, b: &PiecewisePath) -> Result<f64, PathError> {
    if a.dim != b.dim {
        return Err(PathError::Dimension {
            expected: a.dim,
            got: b.dim,
        });
    }
    if a.nodes == b.nodes {
        return Ok(a
            .values
            .chunks(a.dim)
            .zip(b.values.chunks(b.dim))
            .map(|(x, y)| diff_norm(x, y))
            .fold(0.0, f64::max));
    }
    let mut best = 0.0f64;
    let mut va = vec![0.0; a.dim];
    let mut vb = vec![0.0; b.dim];
    for &t in a.nodes.iter().chain(&b.nodes) {
        a.eval_into(t, &mut va);
        b.eval_into(t, &mut vb);
        best = best.max(diff_norm(&va, &vb));
    }
    Ok(best)
}

#[inline]
pub(crate) fn diff_norm(x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 1 {
        (x[0] - y[0]).abs()
    } else {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
