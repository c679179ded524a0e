//! Real trigonometric polynomials on the circle `[0, 1)`.
//!
//! The doubling map acts on this space exactly: composition doubles every
//! frequency and the transfer operator halves even frequencies and kills odd
//! ones. That makes trigonometric polynomials a zero-error oracle for the
//! decomposition code.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// `f(x) = Σ_k cos[k]·cos(2πkx) + sin[k]·sin(2πkx)`; `sin[0]` is always zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigPoly {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_coefficients(vec![c], vec![0.0])
    }

    /// `a·cos(2πkx)`.
    pub fn cos(k: usize, a: f64) -> Self {
        let mut p = Self::with_degree(k);
        p.cos[k] = a;
        p.trimmed()
    }

    /// `b·sin(2πkx)`.
    pub fn sin(k: usize, b: f64) -> Self {
        let mut p = Self::with_degree(k);
        if k > 0 {
            p.sin[k] = b;
        }
        p.trimmed()
    }

    pub fn from_coefficients(mut cos: Vec<f64>, mut sin: Vec<f64>) -> Self {
        let n = cos.len().max(sin.len());
        cos.resize(n, 0.0);
        sin.resize(n, 0.0);
        if n > 0 {
            sin[0] = 0.0;
        }
        Self { cos, sin }.trimmed()
    }

    fn with_degree(k: usize) -> Self {
        Self {
            cos: vec![0.0; k + 1],
            sin: vec![0.0; k + 1],
        }
    }

    fn trimmed(mut self) -> Self {
        while self.cos.last() == Some(&0.0) && self.sin.last() == Some(&0.0) {
            self.cos.pop();
            self.sin.pop();
        }
        self
    }

    pub fn cos_coefficients(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coefficients(&self) -> &[f64] {
        &self.sin
    }

    /// Highest frequency with a nonzero coefficient (0 for constants and zero).
    pub fn degree(&self) -> usize {
        self.cos.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.cos.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (k, (c, d)) in self.cos.iter().zip(&self.sin).enumerate() {
            if *c == 0.0 && *d == 0.0 {
                continue;
            }
            let arg = 2.0 * PI * k as f64 * x;
            s += c * arg.cos() + d * arg.sin();
        }
        s
    }

    /// `∫₀¹ f dx`.
    pub fn mean(&self) -> f64 {
        self.cos.first().copied().unwrap_or(0.0)
    }

    /// `f - ∫f`.
    pub fn centered(&self) -> Self {
        let mut p = self.clone();
        if let Some(c) = p.cos.first_mut() {
            *c = 0.0;
        }
        p.trimmed()
    }

    /// `Σ |coefficients|`, an upper bound for the sup norm.
    pub fn abs_sum(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum()
    }

    /// `∫₀¹ f g dx` by Parseval.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = self.mean() * other.mean();
        for k in 1..self.cos.len().min(other.cos.len()) {
            s += 0.5 * (self.cos[k] * other.cos[k] + self.sin[k] * other.sin[k]);
        }
        s
    }

    /// Transfer operator of the doubling map with respect to Lebesgue:
    /// `(Pf)(x) = ½[f(x/2) + f((x+1)/2)]`.
    pub fn transfer_doubling(&self) -> Self {
        let n = self.cos.len().div_ceil(2);
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for k in (0..self.cos.len()).step_by(2) {
            cos[k / 2] = self.cos[k];
            sin[k / 2] = self.sin[k];
        }
        Self::from_coefficients(cos, sin)
    }

    /// `f ∘ T` for the doubling map `T x = 2x mod 1`.
    pub fn compose_doubling(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let n = 2 * self.degree() + 1;
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for k in 0..self.cos.len() {
            cos[2 * k] = self.cos[k];
            sin[2 * k] = self.sin[k];
        }
        Self::from_coefficients(cos, sin)
    }

    /// Pointwise product via the product-to-sum identities.
    pub fn product(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let n = self.degree() + other.degree() + 1;
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for j in 0..self.cos.len() {
            let (a, b) = (self.cos[j], self.sin[j]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            for k in 0..other.cos.len() {
                let (c, d) = (other.cos[k], other.sin[k]);
                if c == 0.0 && d == 0.0 {
                    continue;
                }
                let sum = j + k;
                let (diff, sign) = if j >= k { (j - k, 1.0) } else { (k - j, -1.0) };
                // cos j cos k = ½[cos(j-k) + cos(j+k)]
                cos[diff] += 0.5 * a * c;
                cos[sum] += 0.5 * a * c;
                // sin j sin k = ½[cos(j-k) - cos(j+k)]
                cos[diff] += 0.5 * b * d;
                cos[sum] -= 0.5 * b * d;
                // sin j cos k = ½[sin(j+k) + sin(j-k)]
                sin[sum] += 0.5 * b * c;
                sin[diff] += 0.5 * b * c * sign;
                // cos j sin k = ½[sin(j+k) - sin(j-k)]
                sin[sum] += 0.5 * a * d;
                sin[diff] -= 0.5 * a * d * sign;
            }
        }
        Self::from_coefficients(cos, sin)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = self.cos.len().max(other.cos.len());
        let get = |v: &Vec<f64>, k: usize| v.get(k).copied().unwrap_or(0.0);
        let cos = (0..n)
            .map(|k| f(get(&self.cos, k), get(&other.cos, k)))
            .collect();
        let sin = (0..n)
            .map(|k| f(get(&self.sin, k), get(&other.sin, k)))
            .collect();
        Self::from_coefficients(cos, sin)
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;
    fn add(self, rhs: &TrigPoly) -> TrigPoly {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;
    fn sub(self, rhs: &TrigPoly) -> TrigPoly {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &TrigPoly {
    type Output = TrigPoly;
    fn mul(self, rhs: f64) -> TrigPoly {
        TrigPoly::from_coefficients(
            self.cos.iter().map(|c| c * rhs).collect(),
            self.sin.iter().map(|c| c * rhs).collect(),
        )
    }
}

impl Neg for &TrigPoly {
    type Output = TrigPoly;
    fn neg(self) -> TrigPoly {
        self * -1.0
    }
}
