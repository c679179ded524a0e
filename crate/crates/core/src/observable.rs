//! Observables on the base space `[0, 1]` of a map.

/// An `ℝᴺ`-valued function of one real variable.
pub trait Observable: Sync {
    fn dim(&self) -> usize;

    /// Writes the value at `x` into `out` (length [`dim`](Observable::dim)).
    fn eval_into(&self, x: f64, out: &mut [f64]);

    fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// Wraps a closure as an [`Observable`].
pub struct FnObservable<F> {
    dim: usize,
    f: F,
}

impl<F> FnObservable<F>
where
    F: Fn(f64, &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Observable for FnObservable<F>
where
    F: Fn(f64, &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// A scalar closure `x ↦ f(x)` as a one-dimensional observable.
pub fn scalar<F: Fn(f64) -> f64 + Sync>(f: F) -> FnObservable<impl Fn(f64, &mut [f64]) + Sync> {
    FnObservable::new(1, move |x, out: &mut [f64]| out[0] = f(x))
}
