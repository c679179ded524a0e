//! Interval maps: the doubling map, the LSV intermittent map and the
//! first-return map of LSV to `Y = (1/2, 1]`.
//!
//! Orbits of the doubling map cannot be iterated in floating point: every
//! application of `2x mod 1` discards one mantissa bit and the orbit reaches
//! `0` after about 53 steps. [`OrbitStream`] therefore realises doubling
//! orbits as a sliding window over a stream of fair random bits, which is the
//! exact symbolic dynamics of the map started from a Lebesgue-distributed
//! point. LSV orbits are iterated directly in double precision.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_rng;

/// Default number of discarded iterates before an orbit is recorded.
pub const DEFAULT_BURN_IN: u64 = 10_000;
/// Default cutoff for first-return times.
pub const DEFAULT_MAX_RETURN: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynError {
    #[error("point {x} outside the domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },
    #[error("LSV parameter gamma = {0} outside [0, 1)")]
    BadGamma(f64),
    #[error("no return to (1/2, 1] from y = {y} within {max_return} iterates")]
    ReturnOverflow { y: f64, max_return: u64 },
    #[error("the induced map is defined for LSV bases only")]
    NotLsv,
    #[error("orbit length must be at least 1")]
    EmptyOrbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Doubling,
    Lsv { gamma: f64 },
}

/// An interval map `T: [0, 1] → [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSystem {
    kind: MapKind,
}

impl MapSystem {
    pub fn doubling() -> Self {
        Self {
            kind: MapKind::Doubling,
        }
    }

    /// The LSV map with parameter `gamma`. `gamma = 0` is accepted and
    /// reproduces the doubling map's branch formulas.
    pub fn lsv(gamma: f64) -> Result<Self, DynError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(DynError::BadGamma(gamma));
        }
        Ok(Self {
            kind: MapKind::Lsv { gamma },
        })
    }

    pub fn from_kind(kind: MapKind) -> Result<Self, DynError> {
        match kind {
            MapKind::Doubling => Ok(Self::doubling()),
            MapKind::Lsv { gamma } => Self::lsv(gamma),
        }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.kind {
            MapKind::Doubling => None,
            MapKind::Lsv { gamma } => Some(gamma),
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            MapKind::Doubling => "doubling".to_string(),
            MapKind::Lsv { gamma } => format!("lsv(gamma={gamma})"),
        }
    }

    /// `Tx`, checking `x ∈ [0, 1]`.
    pub fn step(&self, x: f64) -> Result<f64, DynError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DynError::Domain {
                x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(self.apply(x))
    }

    /// `Tx` without the domain check.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x >= 0.5 {
            return 2.0 * x - 1.0;
        }
        match self.kind {
            MapKind::Doubling => 2.0 * x,
            MapKind::Lsv { gamma } => lsv_lower(gamma, x),
        }
    }

    /// `|T'(x)|` on the branch containing `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        if x >= 0.5 {
            return 2.0;
        }
        match self.kind {
            MapKind::Doubling => 2.0,
            MapKind::Lsv { gamma } => lsv_lower_derivative(gamma, x),
        }
    }
}

#[inline]
fn lsv_lower(gamma: f64, x: f64) -> f64 {
    x * (1.0 + (2.0 * x).powf(gamma))
}

#[inline]
fn lsv_lower_derivative(gamma: f64, x: f64) -> f64 {
    1.0 + (1.0 + gamma) * (2.0 * x).powf(gamma)
}

/// Inverse of the lower LSV branch `[0, 1/2] → [0, 1]`.
pub(crate) fn lsv_lower_inverse(gamma: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    // f(x) = x(1 + (2x)^γ) - z is increasing and convex on [0, 1/2], so Newton
    // from the right of the root decreases monotonically onto it.
    let mut x = z.min(0.5);
    for _ in 0..100 {
        let f = lsv_lower(gamma, x) - z;
        let next = x - f / lsv_lower_derivative(gamma, x);
        if !(next < x) || next <= 0.0 {
            return if next > 0.0 { next.min(x) } else { x };
        }
        let done = (x - next) <= 1e-16 * x;
        x = next;
        if done {
            break;
        }
    }
    x
}

/// Reproducible sampler of orbits started from the invariant measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSampler {
    pub system: MapSystem,
    pub burn_in: u64,
    pub seed: u64,
}

impl OrbitSampler {
    pub fn new(system: MapSystem, seed: u64) -> Self {
        Self {
            system,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// `(x₀, Tx₀, …)` of the requested length, after burn-in from a uniform start.
    pub fn sample_orbit(&self, length: usize) -> Result<Vec<f64>, DynError> {
        if length == 0 {
            return Err(DynError::EmptyOrbit);
        }
        Ok(self.stream(0).take(length))
    }

    /// An independent orbit stream; distinct `stream` values never share draws.
    pub fn stream(&self, stream: u64) -> OrbitStream {
        OrbitStream::new(self.system, self.burn_in, stream_rng(self.seed, stream))
    }
}

#[derive(Debug, Clone)]
enum State {
    /// Doubling: a 64-bit window of the binary expansion; `x` is its top 53 bits.
    Bits(u64),
    Point(f64),
}

/// A stateful orbit generator. Each [`restart`](OrbitStream::restart) draws a
/// fresh uniform initial point and discards `burn_in` iterates.
#[derive(Debug, Clone)]
pub struct OrbitStream {
    system: MapSystem,
    burn_in: u64,
    rng: ChaCha8Rng,
    state: State,
    bit_buf: u64,
    bits_left: u32,
}

impl OrbitStream {
    fn new(system: MapSystem, burn_in: u64, rng: ChaCha8Rng) -> Self {
        let mut s = Self {
            system,
            burn_in,
            rng,
            state: State::Point(0.0),
            bit_buf: 0,
            bits_left: 0,
        };
        s.restart();
        s
    }

    pub fn system(&self) -> &MapSystem {
        &self.system
    }

    pub fn restart(&mut self) {
        self.state = match self.system.kind() {
            MapKind::Doubling => State::Bits(self.rng.random::<u64>()),
            MapKind::Lsv { .. } => {
                let mut x = 0.0;
                while x == 0.0 {
                    x = self.rng.random::<f64>();
                }
                State::Point(x)
            }
        };
        for _ in 0..self.burn_in {
            self.advance();
        }
    }

    #[inline]
    pub fn current(&self) -> f64 {
        match self.state {
            State::Bits(b) => (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64),
            State::Point(x) => x,
        }
    }

    #[inline]
    pub fn advance(&mut self) -> f64 {
        match self.state {
            State::Bits(b) => {
                if self.bits_left == 0 {
                    self.bit_buf = self.rng.random::<u64>();
                    self.bits_left = 64;
                }
                let bit = self.bit_buf & 1;
                self.bit_buf >>= 1;
                self.bits_left -= 1;
                self.state = State::Bits((b << 1) | bit);
            }
            State::Point(x) => self.state = State::Point(self.system.apply(x)),
        }
        self.current()
    }

    /// The current point followed by `length - 1` iterates; leaves the stream
    /// positioned at the last returned point.
    pub fn take(&mut self, length: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(length);
        if length == 0 {
            return out;
        }
        out.push(self.current());
        for _ in 1..length {
            out.push(self.advance());
        }
        out
    }

    /// Draws a uniform number from the stream's generator (used for
    /// auxiliary randomness such as the height of a flow start point).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// The first-return map `F = T^τ` of an LSV map to `Y = (1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InducedMap {
    base: MapSystem,
    pub max_return: u64,
}

impl InducedMap {
    pub fn new(base: MapSystem) -> Result<Self, DynError> {
        match base.kind() {
            MapKind::Lsv { .. } => Ok(Self {
                base,
                max_return: DEFAULT_MAX_RETURN,
            }),
            MapKind::Doubling => Err(DynError::NotLsv),
        }
    }

    pub fn with_max_return(mut self, max_return: u64) -> Self {
        self.max_return = max_return;
        self
    }

    pub fn base(&self) -> &MapSystem {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.base.gamma().unwrap_or(0.0)
    }

    pub fn contains(y: f64) -> bool {
        y > 0.5 && y <= 1.0
    }

    /// Smallest `n ≥ 1` with `Tⁿy ∈ Y`.
    pub fn return_time(&self, y: f64) -> Result<u64, DynError> {
        self.apply(y).map(|(_, tau)| tau)
    }

    /// `(F y, τ(y))`.
    pub fn apply(&self, y: f64) -> Result<(f64, u64), DynError> {
        if !Self::contains(y) {
            return Err(DynError::Domain {
                x: y,
                lo: 0.5,
                hi: 1.0,
            });
        }
        let mut x = self.base.apply(y);
        let mut n = 1;
        while x <= 0.5 {
            if n >= self.max_return {
                return Err(DynError::ReturnOverflow {
                    y,
                    max_return: self.max_return,
                });
            }
            x = self.base.apply(x);
            n += 1;
        }
        Ok((x, n))
    }

    /// Boundary points `b_k` with `τ = k` on `2y - 1 ∈ (b_k, b_{k-1}]`;
    /// returns `b_0, …, b_count`. The Lebesgue measure of `{τ > k}` relative
    /// to `|Y|` is `b_k`.
    pub fn branch_boundaries(&self, count: usize) -> Vec<f64> {
        let gamma = self.gamma();
        let mut b = Vec::with_capacity(count + 1);
        b.push(1.0);
        if count >= 1 {
            b.push(0.5);
        }
        while b.len() <= count {
            let last = *b.last().unwrap();
            b.push(lsv_lower_inverse(gamma, last));
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    #[test]
    fn step_examples() {
        let d = MapSystem::doubling();
        assert_eq!(d.step(0.3).unwrap(), 0.6);
        let l = MapSystem::lsv(0.5).unwrap();
        let expected = 0.25 * (1.0 + 2f64.sqrt() * 0.5);
        assert!(close(l.step(0.25).unwrap(), expected, 1e-15));
        assert!(close(l.step(0.25).unwrap(), 0.426777, 1e-6));
        for g in [0.1, 0.25, 0.4, 0.9] {
            assert_eq!(MapSystem::lsv(g).unwrap().step(0.75).unwrap(), 0.5);
        }
    }

    #[test]
    fn step_rejects_points_outside_unit_interval() {
        let d = MapSystem::doubling();
        assert!(matches!(d.step(-0.1), Err(DynError::Domain { .. })));
        assert!(matches!(d.step(1.5), Err(DynError::Domain { .. })));
        assert!(d.step(f64::NAN).is_err());
        assert!(MapSystem::lsv(1.0).is_err());
        assert!(MapSystem::lsv(-0.1).is_err());
    }

    #[test]
    fn images_stay_in_unit_interval() {
        let maps = [
            MapSystem::doubling(),
            MapSystem::lsv(0.1).unwrap(),
            MapSystem::lsv(0.45).unwrap(),
        ];
        for m in maps {
            for i in 0..=10_000 {
                let x = i as f64 / 10_000.0;
                let y = m.step(x).unwrap();
                assert!((0.0..=1.0).contains(&y), "{} at {x} gave {y}", m.label());
            }
        }
    }

    #[test]
    fn lsv_at_gamma_zero_matches_doubling() {
        let l = MapSystem::lsv(0.0).unwrap();
        let d = MapSystem::doubling();
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            assert!(close(l.step(x).unwrap(), d.step(x).unwrap(), 1e-15));
        }
    }

    #[test]
    fn lower_branch_tends_to_one_at_half() {
        let eps = 1e-6;
        for g in [0.1, 0.25, 0.4] {
            let t = MapSystem::lsv(g).unwrap().step(0.5 - eps).unwrap();
            assert!((t - 1.0).abs() < 3.0 * eps, "gamma {g}: {t}");
        }
    }

    #[test]
    fn lower_inverse_roundtrip() {
        for g in [0.0, 0.1, 0.25, 0.4] {
            for i in 1..=200 {
                let z = i as f64 / 200.0;
                let x = lsv_lower_inverse(g, z);
                assert!((0.0..=0.5).contains(&x));
                assert!(close(lsv_lower(g, x), z, 1e-14), "gamma {g} z {z}");
            }
        }
    }

    #[test]
    fn orbits_are_deterministic() {
        for m in [MapSystem::doubling(), MapSystem::lsv(0.25).unwrap()] {
            let s = OrbitSampler::new(m, 42).with_burn_in(100);
            let a = s.sample_orbit(10).unwrap();
            let b = s.sample_orbit(10).unwrap();
            assert_eq!(
                a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
            let c = OrbitSampler::new(m, 43)
                .with_burn_in(100)
                .sample_orbit(10)
                .unwrap();
            assert_ne!(a, c);
        }
        assert_eq!(
            OrbitSampler::new(MapSystem::doubling(), 1).sample_orbit(0),
            Err(DynError::EmptyOrbit)
        );
    }

    #[test]
    fn doubling_stream_follows_the_map() {
        let mut s = OrbitSampler::new(MapSystem::doubling(), 5).stream(0);
        let d = MapSystem::doubling();
        for _ in 0..1000 {
            let x = s.current();
            let y = s.advance();
            // The window keeps 53 bits; the map applied to the truncated point
            // agrees with the next window except for the freshly shifted-in bit.
            assert!((d.apply(x) - y).abs() <= 2f64.powi(-53) + 1e-300);
        }
    }

    #[test]
    fn doubling_orbit_mean_is_half() {
        let orbit = OrbitSampler::new(MapSystem::doubling(), 11)
            .sample_orbit(1_000_000)
            .unwrap();
        let mean = orbit.iter().sum::<f64>() / orbit.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn lsv_invariant_density_piles_up_near_zero() {
        let orbit = OrbitSampler::new(MapSystem::lsv(0.25).unwrap(), 3)
            .sample_orbit(1_000_000)
            .unwrap();
        let mass = orbit.iter().filter(|&&x| x <= 0.1).count() as f64 / orbit.len() as f64;
        assert!(mass > 0.1, "mass of [0, 0.1] = {mass}");
    }

    #[test]
    fn return_time_examples() {
        let f = InducedMap::new(MapSystem::lsv(0.3).unwrap()).unwrap();
        assert_eq!(f.return_time(0.9).unwrap(), 1);
        assert!(close(f.apply(0.9).unwrap().0, 0.8, 1e-15));
        // T(0.7) = 0.4 lies left of Y.
        assert!(f.return_time(0.7).unwrap() >= 2);
        assert!(matches!(f.return_time(0.5), Err(DynError::Domain { .. })));
        assert!(matches!(f.return_time(0.2), Err(DynError::Domain { .. })));
        assert!(InducedMap::new(MapSystem::doubling()).is_err());
    }

    #[test]
    fn return_overflow_is_reported() {
        let f = InducedMap::new(MapSystem::lsv(0.4).unwrap())
            .unwrap()
            .with_max_return(5);
        let y = 0.5 + 1e-9;
        assert!(matches!(
            f.return_time(y),
            Err(DynError::ReturnOverflow { .. })
        ));
    }

    #[test]
    fn induced_map_is_consistent_with_iterating_step() {
        let base = MapSystem::lsv(0.25).unwrap();
        let f = InducedMap::new(base).unwrap();
        let mut rng = stream_rng(99, 0);
        for _ in 0..10_000 {
            let y = 0.5 + 0.5 * (1.0 - rng.random::<f64>());
            let (fy, tau) = f.apply(y).unwrap();
            let mut x = y;
            for j in 1..=tau {
                x = base.step(x).unwrap();
                if j < tau {
                    assert!(!InducedMap::contains(x));
                }
            }
            assert!(InducedMap::contains(x));
            assert_eq!(x, fy);
        }
    }

    #[test]
    fn branch_boundaries_match_return_times() {
        let f = InducedMap::new(MapSystem::lsv(0.25).unwrap()).unwrap();
        let b = f.branch_boundaries(8);
        assert_eq!(b[0], 1.0);
        assert_eq!(b[1], 0.5);
        for k in 1..8 {
            assert!(b[k + 1] < b[k]);
            let mid = 0.5 * (b[k] + b[k + 1]);
            let y = 0.5 * (1.0 + mid);
            assert_eq!(f.return_time(y).unwrap(), k as u64 + 1);
        }
    }
}
