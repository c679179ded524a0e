//! Suspension semiflows over an interval map.
//!
//! A point of the suspension is a pair `(x, u)` with `0 ≤ u < r(x)`. The flow
//! moves `u` upwards at unit speed and applies the identification
//! `(x, r(x)) ∼ (Tx, 0)` at every roof crossing. Time integrals of observables
//! are computed lap by lap, with the lap boundaries used as exact split points
//! so the integrand is smooth on every quadrature segment.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynsys::{DynError, InducedMap, MapSystem, OrbitStream};

/// Default quadrature step for flow integrals.
pub const DEFAULT_DT: f64 = 1.0 / 64.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuspensionError {
    #[error("roof function must satisfy inf r >= 1, got {0}")]
    RoofBelowOne(f64),
    #[error("tabulated roof needs at least two values")]
    RoofTooShort,
    #[error("height {u} outside [0, r(x)) = [0, {roof}) at x = {x}")]
    Height { x: f64, u: f64, roof: f64 },
    #[error("negative flow time {0}")]
    NegativeTime(f64),
    #[error("quadrature step must be positive, got {0}")]
    BadStep(f64),
    #[error("observable dimension {got} does not match {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Dyn(#[from] DynError),
}

/// The roof function `r: [0, 1] → [1, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoofFunction {
    /// `r(x) = a + b x`.
    Affine { a: f64, b: f64 },
    /// Values on the uniform grid `i / (len - 1)`, linearly interpolated.
    Tabulated { values: Vec<f64> },
}

impl RoofFunction {
    pub fn affine(a: f64, b: f64) -> Result<Self, SuspensionError> {
        let roof = Self::Affine { a, b };
        roof.validate()?;
        Ok(roof)
    }

    pub fn constant(c: f64) -> Result<Self, SuspensionError> {
        Self::affine(c, 0.0)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self, SuspensionError> {
        let roof = Self::Tabulated { values };
        roof.validate()?;
        Ok(roof)
    }

    pub fn validate(&self) -> Result<(), SuspensionError> {
        if let Self::Tabulated { values } = self {
            if values.len() < 2 {
                return Err(SuspensionError::RoofTooShort);
            }
        }
        let inf = self.inf();
        if !(inf >= 1.0) {
            return Err(SuspensionError::RoofBelowOne(inf));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Affine { a, b } => a + b * x,
            Self::Tabulated { values } => {
                let cells = values.len() - 1;
                let s = (x.clamp(0.0, 1.0) * cells as f64).min(cells as f64);
                let k = (s.floor() as usize).min(cells - 1);
                let w = s - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            Self::Affine { a, b } => a + b.min(0.0),
            Self::Tabulated { values } => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Self::Affine { a, b } => a + b.max(0.0),
            Self::Tabulated { values } => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `∫₀¹ r(x) dx` (exact for both forms).
    pub fn lebesgue_mean(&self) -> f64 {
        match self {
            Self::Affine { a, b } => a + 0.5 * b,
            Self::Tabulated { values } => {
                let cells = (values.len() - 1) as f64;
                let inner: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum();
                inner / cells
            }
        }
    }
}

type FlowFn = dyn Fn(f64, f64, &mut [f64]) + Send + Sync;

/// An observable `v(x, u)` on the suspension.
#[derive(Clone)]
pub struct FlowObservable {
    dim: usize,
    evaluator: Arc<FlowFn>,
    height_independent: bool,
    pub declared_mean_zero: bool,
}

impl fmt::Debug for FlowObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowObservable")
            .field("dim", &self.dim)
            .field("height_independent", &self.height_independent)
            .field("declared_mean_zero", &self.declared_mean_zero)
            .finish()
    }
}

impl FlowObservable {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, f64, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            evaluator: Arc::new(f),
            height_independent: false,
            declared_mean_zero: false,
        }
    }

    /// `v(x, u) = g(x)`. Integrals over a lap segment are then exact.
    pub fn height_independent<F>(dim: usize, g: F) -> Self
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            evaluator: Arc::new(move |x, _u, out: &mut [f64]| g(x, out)),
            height_independent: true,
            declared_mean_zero: false,
        }
    }

    /// `v(x, u) = cos(2πx)`: mean zero over the testbed flow because
    /// `∫₀¹ cos(2πx)(1 + x/2) dx = 0`.
    pub fn testbed() -> Self {
        Self::height_independent(1, |x, out| out[0] = (2.0 * std::f64::consts::PI * x).cos())
            .with_mean_zero(true)
    }

    pub fn with_mean_zero(mut self, declared: bool) -> Self {
        self.declared_mean_zero = declared;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_height_independent(&self) -> bool {
        self.height_independent
    }

    #[inline]
    pub fn eval_into(&self, x: f64, u: f64, out: &mut [f64]) {
        (self.evaluator)(x, u, out)
    }

    pub fn eval(&self, x: f64, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, u, &mut out);
        out
    }

    /// Adds `∫_a^b v(x, s) ds` to `acc` using composite Simpson with step at most `dt`.
    fn accumulate_segment(
        &self,
        x: f64,
        a: f64,
        b: f64,
        dt: f64,
        acc: &mut [f64],
        scratch: &mut [f64],
    ) {
        let len = b - a;
        if len <= 0.0 {
            return;
        }
        if self.height_independent {
            self.eval_into(x, a, scratch);
            for (s, v) in acc.iter_mut().zip(scratch.iter()) {
                *s += v * len;
            }
            return;
        }
        let panels = (len / dt).ceil().max(1.0) as usize;
        let h = len / panels as f64;
        let w = h / 6.0;
        self.eval_into(x, a, scratch);
        for (s, v) in acc.iter_mut().zip(scratch.iter()) {
            *s += w * v;
        }
        for i in 0..panels {
            let left = a + i as f64 * h;
            let right = if i + 1 == panels { b } else { left + h };
            self.eval_into(x, 0.5 * (left + right), scratch);
            for (s, v) in acc.iter_mut().zip(scratch.iter()) {
                *s += 4.0 * w * v;
            }
            self.eval_into(x, right, scratch);
            let end_weight = if i + 1 == panels { w } else { 2.0 * w };
            for (s, v) in acc.iter_mut().zip(scratch.iter()) {
                *s += end_weight * v;
            }
        }
    }
}

/// The suspension semiflow over `base` under `roof`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspensionFlow {
    pub base: MapSystem,
    pub roof: RoofFunction,
}

impl SuspensionFlow {
    pub fn new(base: MapSystem, roof: RoofFunction) -> Result<Self, SuspensionError> {
        roof.validate()?;
        Ok(Self { base, roof })
    }

    /// Doubling base with `r(x) = 1 + x/2`.
    pub fn testbed() -> Self {
        Self {
            base: MapSystem::doubling(),
            roof: RoofFunction::Affine { a: 1.0, b: 0.5 },
        }
    }

    fn check_start(&self, x: f64, u: f64) -> Result<(), SuspensionError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DynError::Domain {
                x,
                lo: 0.0,
                hi: 1.0,
            }
            .into());
        }
        let roof = self.roof.eval(x);
        if !(u >= 0.0 && u < roof) {
            return Err(SuspensionError::Height { x, u, roof });
        }
        Ok(())
    }

    /// `N` with `r_N(x) ≤ t + u < r_{N+1}(x)`, where `r_k` is the `k`-th
    /// Birkhoff sum of the roof along the base orbit of `x`.
    pub fn lap_number(&self, x: f64, u: f64, t: f64) -> Result<u64, SuspensionError> {
        self.flow_with_laps(x, u, t).map(|(n, _, _)| n)
    }

    /// `T_t(x, u)`.
    pub fn flow_point(&self, x: f64, u: f64, t: f64) -> Result<(f64, f64), SuspensionError> {
        self.flow_with_laps(x, u, t).map(|(_, x, u)| (x, u))
    }

    fn flow_with_laps(&self, x: f64, u: f64, t: f64) -> Result<(u64, f64, f64), SuspensionError> {
        self.check_start(x, u)?;
        if !(t >= 0.0) {
            return Err(SuspensionError::NegativeTime(t));
        }
        let total = t + u;
        let mut acc = 0.0;
        let mut y = x;
        let mut laps = 0;
        loop {
            let r = self.roof.eval(y);
            if acc + r > total {
                return Ok((laps, y, total - acc));
            }
            acc += r;
            y = self.base.apply(y);
            laps += 1;
        }
    }

    /// `∫₀^{t_end} v(T_s(x, u)) ds` with lap-split composite Simpson.
    pub fn flow_integral(
        &self,
        v: &FlowObservable,
        x: f64,
        u: f64,
        t_end: f64,
        dt: f64,
    ) -> Result<Vec<f64>, SuspensionError> {
        self.check_start(x, u)?;
        let base = self.base;
        let orbit = std::iter::successors(Some(x), move |&y| Some(base.apply(y)));
        let mut out = self.cumulative_integrals(v, orbit, u, &[t_end], dt)?;
        Ok(out.pop().unwrap())
    }

    /// Running integrals `∫₀^{t_c} v(T_s(x₀, u₀)) ds` at each checkpoint
    /// `t_c` (non-decreasing), along the given base orbit `x₀, x₁, …`.
    ///
    /// Passing an orbit from [`OrbitStream`](crate::dynsys::OrbitStream)
    /// gives long-time integrals whose base dynamics do not degrade with
    /// floating-point rounding.
    pub fn cumulative_integrals<I>(
        &self,
        v: &FlowObservable,
        orbit: I,
        u0: f64,
        checkpoints: &[f64],
        dt: f64,
    ) -> Result<Vec<Vec<f64>>, SuspensionError>
    where
        I: IntoIterator<Item = f64>,
    {
        if !(dt > 0.0) {
            return Err(SuspensionError::BadStep(dt));
        }
        let dim = v.dim();
        let mut orbit = orbit.into_iter();
        let mut x = orbit.next().ok_or(DynError::EmptyOrbit)?;
        let mut roof = self.roof.eval(x);
        if !(u0 >= 0.0 && u0 < roof) {
            return Err(SuspensionError::Height { x, u: u0, roof });
        }
        let mut u = u0;
        let mut elapsed = 0.0;
        let mut acc = vec![0.0; dim];
        let mut scratch = vec![0.0; dim];
        let mut out = Vec::with_capacity(checkpoints.len());
        for &target in checkpoints {
            if !(target >= elapsed) {
                return Err(SuspensionError::NegativeTime(target - elapsed));
            }
            while elapsed + (roof - u) <= target {
                v.accumulate_segment(x, u, roof, dt, &mut acc, &mut scratch);
                elapsed += roof - u;
                x = orbit.next().ok_or(DynError::EmptyOrbit)?;
                roof = self.roof.eval(x);
                u = 0.0;
            }
            let step = target - elapsed;
            v.accumulate_segment(x, u, u + step, dt, &mut acc, &mut scratch);
            u += step;
            elapsed = target;
            out.push(acc.clone());
        }
        Ok(out)
    }

    /// `v_X(x) = ∫₀^{r(x)} v(x, s) ds`.
    pub fn induced_observable(
        &self,
        v: &FlowObservable,
        x: f64,
        dt: f64,
    ) -> Result<Vec<f64>, SuspensionError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DynError::Domain {
                x,
                lo: 0.0,
                hi: 1.0,
            }
            .into());
        }
        if !(dt > 0.0) {
            return Err(SuspensionError::BadStep(dt));
        }
        let mut acc = vec![0.0; v.dim()];
        let mut scratch = vec![0.0; v.dim()];
        v.accumulate_segment(x, 0.0, self.roof.eval(x), dt, &mut acc, &mut scratch);
        Ok(acc)
    }

    /// A start point `(x, u)` for the flow-invariant measure, given a stream
    /// whose points follow the base invariant measure: `x` is accepted with
    /// probability `r(x)/sup r`, then `u` is uniform on `[0, r(x))`. Each
    /// rejection restarts the stream, so the accepted orbit is independent of
    /// the rejected ones. The stream is left positioned at `x`.
    pub fn sample_start(&self, stream: &mut OrbitStream) -> (f64, f64) {
        let sup = self.roof.sup();
        loop {
            let x = stream.current();
            let r = self.roof.eval(x);
            if stream.uniform() * sup < r {
                return (x, stream.uniform() * r);
            }
            stream.restart();
        }
    }

    /// Mean of `v` over the suspension measure when the base invariant
    /// measure is Lebesgue (doubling base): `∫₀¹ v_X dx / ∫₀¹ r dx`, by
    /// composite Simpson over `cells` (even) base cells.
    pub fn lebesgue_base_mean(
        &self,
        v: &FlowObservable,
        cells: usize,
        dt: f64,
    ) -> Result<Vec<f64>, SuspensionError> {
        let cells = cells.max(2) + cells % 2;
        let h = 1.0 / cells as f64;
        let mut acc = vec![0.0; v.dim()];
        for i in 0..=cells {
            let w = if i == 0 || i == cells {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let vx = self.induced_observable(v, i as f64 * h, dt)?;
            for (a, b) in acc.iter_mut().zip(vx) {
                *a += w * b;
            }
        }
        let rbar = self.roof.lebesgue_mean();
        Ok(acc.into_iter().map(|s| s * h / 3.0 / rbar).collect())
    }

    /// Roof of the suspension over the induced map:
    /// `φ(y) = Σ_{j<τ(y)} r(Tʲ y)`, returned with `τ(y)`.
    pub fn induced_roof(
        &self,
        induced: &InducedMap,
        y: f64,
    ) -> Result<(f64, u64), SuspensionError> {
        let (_, tau) = induced.apply(y)?;
        let mut x = y;
        let mut phi = 0.0;
        for _ in 0..tau {
            phi += self.roof.eval(x);
            x = self.base.apply(x);
        }
        Ok((phi, tau))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn start_points_follow_the_roof_weighted_measure() {
        // For r(x) = 1 + x/2 over Lebesgue, E[x] = ∫x(1 + x/2)dx / 1.25 = 8/15
        // and E[u] = ∫r²/2 dx / 1.25 = 19/30.
        let flow = SuspensionFlow::testbed();
        let mut stream = crate::dynsys::OrbitSampler::new(MapSystem::doubling(), 5)
            .with_burn_in(0)
            .stream(0);
        let n = 200_000;
        let (mut sx, mut su) = (0.0, 0.0);
        for _ in 0..n {
            let (x, u) = flow.sample_start(&mut stream);
            assert!(u >= 0.0 && u < flow.roof.eval(x));
            sx += x;
            su += u;
            stream.restart();
        }
        assert!((sx / n as f64 - 8.0 / 15.0).abs() < 0.003);
        assert!((su / n as f64 - 19.0 / 30.0).abs() < 0.003);
    }

    fn lsv_flow() -> SuspensionFlow {
        SuspensionFlow::new(
            MapSystem::lsv(0.3).unwrap(),
            RoofFunction::affine(1.2, 0.7).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn roof_validation() {
        assert!(RoofFunction::affine(1.0, 0.5).is_ok());
        assert!(RoofFunction::affine(1.0, -0.1).is_err());
        assert!(RoofFunction::constant(0.5).is_err());
        assert!(RoofFunction::tabulated(vec![1.0]).is_err());
        assert!(RoofFunction::tabulated(vec![1.0, 0.9, 2.0]).is_err());
        let t = RoofFunction::tabulated(vec![1.0, 3.0]).unwrap();
        assert_eq!(t.eval(0.25), 1.5);
        assert_eq!(t.lebesgue_mean(), 2.0);
    }

    #[test]
    fn lap_number_examples() {
        let flow = SuspensionFlow::testbed();
        let (x, u) = (0.2, 0.3);
        assert_eq!(flow.lap_number(x, u, 0.5).unwrap(), 0);
        let c = 1.7;
        let flat = SuspensionFlow::new(
            MapSystem::lsv(0.2).unwrap(),
            RoofFunction::constant(c).unwrap(),
        )
        .unwrap();
        assert_eq!(flat.lap_number(0.37, 0.0, 3.5 * c).unwrap(), 3);
        assert!(flow.lap_number(0.2, 1.2, 1.0).is_err());
        assert!(flow.lap_number(0.2, 0.1, -1.0).is_err());
    }

    #[test]
    fn lap_number_matches_repeated_subtraction() {
        let flow = lsv_flow();
        let mut rng = crate::rng::stream_rng(17, 0);
        use rand::Rng;
        for _ in 0..2000 {
            let x: f64 = rng.random();
            let u = rng.random::<f64>() * flow.roof.eval(x);
            let t = rng.random::<f64>() * 40.0;
            let mut rem = t + u;
            let mut y = x;
            let mut n = 0;
            while rem >= flow.roof.eval(y) {
                rem -= flow.roof.eval(y);
                y = flow.base.step(y).unwrap();
                n += 1;
            }
            let laps = flow.lap_number(x, u, t).unwrap();
            assert_eq!(laps, n);
            // Defining inequality r_N ≤ t + u < r_{N+1}.
            let mut r_n = 0.0;
            let mut z = x;
            for _ in 0..laps {
                r_n += flow.roof.eval(z);
                z = flow.base.apply(z);
            }
            assert!(r_n <= t + u && t + u < r_n + flow.roof.eval(z));
        }
    }

    #[test]
    fn flow_point_examples() {
        let flow = SuspensionFlow::testbed();
        assert_eq!(flow.flow_point(0.3, 0.4, 0.0).unwrap(), (0.3, 0.4));
        let x = 0.3;
        let (y, u) = flow.flow_point(x, 0.0, flow.roof.eval(x)).unwrap();
        assert_eq!(y, flow.base.apply(x));
        assert_eq!(u, 0.0);
    }

    #[test]
    fn flow_point_stays_below_roof() {
        let flow = lsv_flow();
        for i in 0..500 {
            let x = (i as f64 + 0.5) / 500.0;
            let (y, u) = flow.flow_point(x, 0.1, 0.37 * i as f64).unwrap();
            assert!(u >= 0.0 && u < flow.roof.eval(y));
        }
    }

    #[test]
    fn constant_observable_integrates_to_elapsed_time() {
        let flow = lsv_flow();
        let v = FlowObservable::new(3, |_, _, out| out.fill(1.0));
        for (x, u, t) in [(0.1, 0.2, 7.3), (0.8, 0.0, 0.1), (0.45, 1.0, 25.0)] {
            let got = flow.flow_integral(&v, x, u, t, DEFAULT_DT).unwrap();
            for g in got {
                assert!((g - t).abs() < 1e-12, "{g} vs {t}");
            }
        }
    }

    #[test]
    fn unit_roof_reduces_to_birkhoff_sum() {
        let flow = SuspensionFlow::new(
            MapSystem::lsv(0.25).unwrap(),
            RoofFunction::constant(1.0).unwrap(),
        )
        .unwrap();
        let v = FlowObservable::new(1, |x, u, out| {
            out[0] = (3.0 * x).sin() + x * (2.0 * PI * u).cos() + u * u
        });
        let x0 = 0.6180339887;
        let n = 50;
        let got = flow
            .flow_integral(&v, x0, 0.0, n as f64, DEFAULT_DT)
            .unwrap()[0];
        // v'(x) = ∫₀¹ v(x, s) ds = sin(3x) + 1/3 in closed form.
        let mut x = x0;
        let mut expected = 0.0;
        for _ in 0..n {
            expected += (3.0 * x).sin() + 1.0 / 3.0;
            x = flow.base.apply(x);
        }
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn quadrature_converges_at_least_quadratically() {
        let flow = lsv_flow();
        let v = FlowObservable::new(1, |x, u, out| out[0] = (x + 2.0 * u).sin() * (1.0 + u).ln());
        let i = |dt: f64| flow.flow_integral(&v, 0.3, 0.2, 12.0, dt).unwrap()[0];
        let (a, b, c) = (i(0.25), i(0.125), i(0.0625));
        let ratio = (a - b).abs() / (b - c).abs();
        assert!(ratio > 4.0, "ratio {ratio}");
        assert!((b - c).abs() < 1e-5);
    }

    #[test]
    fn induced_observable_examples() {
        let flow = SuspensionFlow::testbed();
        let g = FlowObservable::new(1, {
            let roof = flow.roof.clone();
            move |x, u, out| out[0] = (2.0 * PI * u / roof.eval(x)).sin()
        });
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!(flow.induced_observable(&g, x, DEFAULT_DT).unwrap()[0].abs() < 1e-8);
        }
        let v = FlowObservable::testbed();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let got = flow.induced_observable(&v, x, DEFAULT_DT).unwrap()[0];
            let expected = (2.0 * PI * x).cos() * (1.0 + x / 2.0);
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn testbed_mean_certificate() {
        let flow = SuspensionFlow::testbed();
        let v = FlowObservable::testbed();
        assert!(v.declared_mean_zero);
        let mean = flow.lebesgue_base_mean(&v, 4096, DEFAULT_DT).unwrap();
        assert!(mean[0].abs() < 1e-8, "{mean:?}");
    }

    #[test]
    fn induced_roof_is_bounded_by_sup_r_times_tau() {
        let flow = lsv_flow();
        let induced = InducedMap::new(flow.base).unwrap();
        for i in 1..=1000 {
            let y = 0.5 + 0.5 * (i as f64 - 0.5) / 1000.0;
            let (phi, tau) = flow.induced_roof(&induced, y).unwrap();
            assert!(phi <= flow.roof.sup() * tau as f64);
            assert!(phi >= tau as f64);
        }
    }

    #[test]
    fn cumulative_checkpoints_are_consistent() {
        let flow = lsv_flow();
        let v = FlowObservable::new(2, |x, u, out| {
            out[0] = x - 0.3;
            out[1] = (u * 3.0).cos();
        });
        let base = flow.base;
        let orbit = std::iter::successors(Some(0.41), move |&y| Some(base.apply(y)));
        let cps = [0.5, 2.0, 2.0, 9.75];
        let got = flow
            .cumulative_integrals(&v, orbit, 0.3, &cps, DEFAULT_DT)
            .unwrap();
        for (cp, g) in cps.iter().zip(&got) {
            let direct = flow.flow_integral(&v, 0.41, 0.3, *cp, DEFAULT_DT).unwrap();
            // Checkpoints add split points, so agreement is to quadrature accuracy.
            for (a, b) in g.iter().zip(direct) {
                assert!((a - b).abs() < 1e-7);
            }
        }
        assert!(flow
            .cumulative_integrals(&v, [0.41], 0.3, &[1.0, 0.5], DEFAULT_DT)
            .is_err());
    }
}
