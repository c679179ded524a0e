//! Closed-form and tabulated observables as a small expression tree.

use super::{DecompError, GridFunction, TrigPoly};
use crate::dynsys::{InducedMap, MapSystem};
use crate::Observable;

/// The map a [`Function::Pullback`] composes with.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardMap {
    Doubling,
    Induced(InducedMap),
}

impl ForwardMap {
    pub fn apply(&self, x: f64) -> Result<f64, DecompError> {
        match self {
            ForwardMap::Doubling => Ok(MapSystem::doubling().apply(x)),
            ForwardMap::Induced(f) => Ok(f.apply(x)?.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Function {
    /// One trigonometric polynomial per component.
    Trig(Vec<TrigPoly>),
    Grid(GridFunction),
    Constant(Vec<f64>),
    /// `inner ∘ map`.
    Pullback {
        inner: Box<Function>,
        map: ForwardMap,
    },
    /// `Σ cᵢ fᵢ`.
    Linear(Vec<(f64, Function)>),
}

impl Function {
    pub fn scalar_trig(p: TrigPoly) -> Self {
        Function::Trig(vec![p])
    }

    pub fn zero(dim: usize) -> Self {
        Function::Constant(vec![0.0; dim])
    }

    pub fn pullback(inner: Function, map: ForwardMap) -> Self {
        Function::Pullback {
            inner: Box::new(inner),
            map,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Function::Trig(p) => p.len(),
            Function::Grid(g) => g.dim(),
            Function::Constant(c) => c.len(),
            Function::Pullback { inner, .. } => inner.dim(),
            Function::Linear(terms) => terms.first().map_or(0, |(_, f)| f.dim()),
        }
    }

    pub fn try_eval_into(&self, x: f64, out: &mut [f64]) -> Result<(), DecompError> {
        match self {
            Function::Trig(ps) => {
                for (o, p) in out.iter_mut().zip(ps) {
                    *o = p.eval(x);
                }
            }
            Function::Grid(g) => g.eval_into(x, out),
            Function::Constant(c) => out.copy_from_slice(c),
            Function::Pullback { inner, map } => inner.try_eval_into(map.apply(x)?, out)?,
            Function::Linear(terms) => {
                out.fill(0.0);
                let mut tmp = vec![0.0; out.len()];
                for (c, f) in terms {
                    f.try_eval_into(x, &mut tmp)?;
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += c * t;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn try_eval(&self, x: f64) -> Result<Vec<f64>, DecompError> {
        let mut out = vec![0.0; self.dim()];
        self.try_eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Trig polynomials of a closed-form function, if it is one.
    pub fn as_trig(&self) -> Option<&[TrigPoly]> {
        match self {
            Function::Trig(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridFunction> {
        match self {
            Function::Grid(g) => Some(g),
            _ => None,
        }
    }
}

/// Points where an induced first return overflows evaluate to `NaN`.
impl Observable for Function {
    fn dim(&self) -> usize {
        Function::dim(self)
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        if self.try_eval_into(x, out).is_err() {
            out.fill(f64::NAN);
        }
    }
}
