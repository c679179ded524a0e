//! Exact 1-Wasserstein and Prokhorov distances between uniform empirical
//! measures on path space, with the uniform distance as ground cost.
//!
//! For two measures with `M` atoms each, both distances reduce to problems on
//! the `M × M` cost matrix: `W₁` is a minimum-cost assignment, and `Π` is the
//! least `ε` for which the graph of pairs at distance `≤ ε` has a matching
//! of size at least `M(1 − ε)`.

mod assignment;
mod matching;

pub use assignment::solve as solve_assignment;
pub use matching::max_matching;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathspace::{sup_distance, EmpiricalPathMeasure, PathError};

pub const ASSIGNMENT_SOLVER: &str =
    "shortest augmenting path with potentials (Jonker-Volgenant / Hungarian), dense";
pub const MATCHING_SOLVER: &str =
    "Hopcroft-Karp on thresholded bipartite graph, bisection over sorted candidates";

/// Relative slack for `Π ≤ √W` and `Π ≤ s`, which hold exactly in real
/// arithmetic but pass through a floating-point sum and square root.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OtError {
    #[error("measures have {left} and {right} atoms")]
    SizeMismatch { left: usize, right: usize },
    #[error("inequality violated: {what} ({lhs} > {rhs})")]
    InequalityViolation {
        what: &'static str,
        lhs: f64,
        rhs: f64,
    },
    #[error("invalid cost matrix: {0}")]
    BadCost(&'static str),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Square matrix of ground distances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self, OtError> {
        if size == 0 || data.len() != size * size {
            return Err(OtError::BadCost("need size >= 1 and size² entries"));
        }
        if data.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(OtError::BadCost("entries must be finite and nonnegative"));
        }
        Ok(Self { size, data })
    }

    /// `C_ij = sup_t |μ_i(t) − ν_j(t)|`.
    pub fn from_measures(
        mu: &EmpiricalPathMeasure,
        nu: &EmpiricalPathMeasure,
    ) -> Result<Self, OtError> {
        if mu.len() != nu.len() {
            return Err(OtError::SizeMismatch {
                left: mu.len(),
                right: nu.len(),
            });
        }
        let size = mu.len();
        let rows: Vec<Vec<f64>> = mu
            .paths()
            .par_iter()
            .map(|a| {
                nu.paths()
                    .iter()
                    .map(|b| sup_distance(a, b))
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            size,
            data: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `max_i C_ii`: the sup distance of the coupling that pairs atoms by index.
    pub fn index_coupling_sup(&self) -> f64 {
        (0..self.size).map(|i| self.get(i, i)).fold(0.0, f64::max)
    }
}

/// `(1/M) min_π Σᵢ C(i, π(i))`.
pub fn wasserstein1(mu: &EmpiricalPathMeasure, nu: &EmpiricalPathMeasure) -> Result<f64, OtError> {
    Ok(wasserstein1_from_costs(&CostMatrix::from_measures(mu, nu)?))
}

pub fn wasserstein1_from_costs(cost: &CostMatrix) -> f64 {
    solve_assignment(cost.size, &cost.data).0 / cost.size as f64
}

pub fn prokhorov(mu: &EmpiricalPathMeasure, nu: &EmpiricalPathMeasure) -> Result<f64, OtError> {
    Ok(prokhorov_from_costs(&CostMatrix::from_measures(mu, nu)?))
}

/// Whether a matching on `{C_ij ≤ ε}` leaves at most `Mε` atoms unmatched.
pub fn prokhorov_feasible(cost: &CostMatrix, eps: f64) -> bool {
    let m = cost.size;
    let adj: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..m).filter(|&j| cost.get(i, j) <= eps).collect())
        .collect();
    let matched = max_matching(&adj, m);
    (m - matched) as f64 / m as f64 <= eps
}

/// Least feasible `ε` among the candidates `{C_ij} ∪ {k/M}`. Feasibility is
/// monotone in `ε`, so bisection over the sorted candidates finds the same
/// value as a linear scan.
pub fn prokhorov_from_costs(cost: &CostMatrix) -> f64 {
    let m = cost.size;
    let mut candidates: Vec<f64> = cost.data.clone();
    candidates.extend((0..=m).map(|k| k as f64 / m as f64));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // ε = 1 is always feasible.
    let (mut lo, mut hi) = (0, candidates.partition_point(|&c| c < 1.0));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if prokhorov_feasible(cost, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo].min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub wasserstein1: f64,
    pub prokhorov: f64,
    pub coupled_sup: Option<f64>,
}

/// Computes both distances and confirms `Π ≤ √W₁` and, when supplied,
/// `Π ≤ coupled_sup`.
pub fn check_inequalities(
    mu: &EmpiricalPathMeasure,
    nu: &EmpiricalPathMeasure,
    coupled_sup: Option<f64>,
) -> Result<InequalityReport, OtError> {
    check_inequalities_from_costs(&CostMatrix::from_measures(mu, nu)?, coupled_sup)
}

pub fn check_inequalities_from_costs(
    cost: &CostMatrix,
    coupled_sup: Option<f64>,
) -> Result<InequalityReport, OtError> {
    let w = wasserstein1_from_costs(cost);
    let p = prokhorov_from_costs(cost);
    let root = w.sqrt();
    if p > root * (1.0 + ROUNDING_SLACK) + ROUNDING_SLACK {
        return Err(OtError::InequalityViolation {
            what: "prokhorov <= sqrt(wasserstein1)",
            lhs: p,
            rhs: root,
        });
    }
    if let Some(s) = coupled_sup {
        if p > s * (1.0 + ROUNDING_SLACK) + ROUNDING_SLACK {
            return Err(OtError::InequalityViolation {
                what: "prokhorov <= coupled sup distance",
                lhs: p,
                rhs: s,
            });
        }
    }
    Ok(InequalityReport {
        wasserstein1: w,
        prokhorov: p,
        coupled_sup,
    })
}

/// One distance measurement, as emitted by experiments and the CLI. A
/// metric that was not requested is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub n: Option<u64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub d: usize,
    #[serde(rename = "W1")]
    pub w1: Option<f64>,
    #[serde(rename = "Pi")]
    pub pi: Option<f64>,
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atom_example() {
        let c = CostMatrix::new(2, vec![0.3, 1.0, 1.0, 0.3]).unwrap();
        assert_eq!(prokhorov_from_costs(&c), 0.3);
        assert!((wasserstein1_from_costs(&c) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_costs() {
        let c = CostMatrix::new(3, vec![0.0, 2.0, 2.0, 2.0, 0.0, 2.0, 2.0, 2.0, 0.0]).unwrap();
        assert_eq!(prokhorov_from_costs(&c), 0.0);
        assert_eq!(wasserstein1_from_costs(&c), 0.0);
    }

    #[test]
    fn far_apart_measures_cap_at_one() {
        let c = CostMatrix::new(2, vec![5.0; 4]).unwrap();
        assert_eq!(prokhorov_from_costs(&c), 1.0);
        assert_eq!(wasserstein1_from_costs(&c), 5.0);
    }

    #[test]
    fn partial_matching_trades_mass_for_distance() {
        // One atom pair is far; leaving it unmatched costs ε ≥ 1/4.
        let mut data = vec![9.0; 16];
        for i in 0..3 {
            data[i * 4 + i] = 0.01;
        }
        data[15] = 9.0;
        let c = CostMatrix::new(4, data).unwrap();
        assert_eq!(prokhorov_from_costs(&c), 0.25);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CostMatrix::new(2, vec![0.0; 3]).is_err());
        assert!(CostMatrix::new(1, vec![-1.0]).is_err());
        assert!(CostMatrix::new(1, vec![f64::NAN]).is_err());
    }
}
