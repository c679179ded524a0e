//! Decomposition of a flow observable over the doubling-base suspension,
//! indexed by `(y, u)`: the base decomposition of `v_X(y) = ∫₀^{r(y)} v(y, s) ds`
//! is lifted with `χ(y, u) = χ'(y) + ∫₀^u v(y, s) ds` and `m(y, u) = m'(y)` on
//! the last unit of height below the roof, zero below it.

use super::{
    primary_decomposition_with, DecompError, DecompOptions, Decomposition, Function, GridFunction,
    TransferOperator,
};
use crate::dynsys::MapKind;
use crate::suspension::{FlowObservable, SuspensionFlow, DEFAULT_DT};

#[derive(Debug, Clone)]
pub struct FlowDecomposition {
    flow: SuspensionFlow,
    v: FlowObservable,
    base: Decomposition,
    dt: f64,
}

impl FlowDecomposition {
    /// Tabulates `v_X` on `cells` base cells and decomposes it under the
    /// exact doubling operator. The roof must be at least one everywhere.
    pub fn new(
        flow: &SuspensionFlow,
        v: &FlowObservable,
        opts: &DecompOptions,
    ) -> Result<Self, DecompError> {
        if flow.base.kind() != MapKind::Doubling {
            return Err(DecompError::Unsupported(
                "flow decomposition needs a doubling base",
            ));
        }
        let dt = DEFAULT_DT;
        let mut err = None;
        let g = GridFunction::from_fn(0.0, 1.0, opts.cells, v.dim(), |x, out| {
            match flow.induced_observable(v, x, dt) {
                Ok(vx) => out.copy_from_slice(&vx),
                Err(e) => err = Some(e),
            }
        })?;
        if let Some(e) = err {
            return Err(e.into());
        }
        let base = primary_decomposition_with(
            &TransferOperator::exact_doubling(),
            &Function::Grid(g),
            opts,
        )?;
        Ok(Self {
            flow: flow.clone(),
            v: v.clone(),
            base,
            dt,
        })
    }

    pub fn base(&self) -> &Decomposition {
        &self.base
    }

    /// `Σ' / r̄`: the covariance of the flow's Brownian limit.
    pub fn flow_sigma(&self) -> Vec<Vec<f64>> {
        let rbar = self.flow.roof.lebesgue_mean();
        self.base
            .sigma
            .iter()
            .map(|row| row.iter().map(|s| s / rbar).collect())
            .collect()
    }

    pub fn chi(&self, y: f64, u: f64) -> Result<Vec<f64>, DecompError> {
        let mut out = self.base.chi.try_eval(y)?;
        let along = self.flow.flow_integral(&self.v, y, 0.0, u, self.dt)?;
        out.iter_mut().zip(along).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn m(&self, y: f64, u: f64) -> Result<Vec<f64>, DecompError> {
        if u >= self.flow.roof.eval(y) - 1.0 {
            self.base.m.try_eval(y)
        } else {
            Ok(vec![0.0; self.v.dim()])
        }
    }

    /// `ψ(y, u) = ∫₀¹ v(T_s(y, u)) ds`.
    pub fn psi(&self, y: f64, u: f64) -> Result<Vec<f64>, DecompError> {
        Ok(self.flow.flow_integral(&self.v, y, u, 1.0, self.dt)?)
    }

    /// `ψ − (m + χ∘T₁ − χ)` at `(y, u)`.
    pub fn identity_defect(&self, y: f64, u: f64) -> Result<Vec<f64>, DecompError> {
        let (y1, u1) = self.flow.flow_point(y, u, 1.0)?;
        let psi = self.psi(y, u)?;
        let m = self.m(y, u)?;
        let after = self.chi(y1, u1)?;
        let before = self.chi(y, u)?;
        Ok((0..psi.len())
            .map(|c| psi[c] - (m[c] + after[c] - before[c]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lifted_identity_holds_on_the_testbed() {
        let flow = SuspensionFlow::testbed();
        let v = FlowObservable::testbed();
        let d = FlowDecomposition::new(&flow, &v, &DecompOptions::default()).unwrap();
        assert!(d.base().residual < 1e-10);
        // The only error left is linear interpolation of v_X on 4096 cells.
        for i in 0..200 {
            let y = (i as f64 + 0.37) / 200.0;
            let roof = flow.roof.eval(y);
            for frac in [0.0, 0.3, 0.95] {
                let defect = d.identity_defect(y, frac * roof).unwrap();
                assert!(defect[0].abs() < 1e-6, "y={y} frac={frac}: {defect:?}");
            }
        }
        let s = d.flow_sigma()[0][0];
        assert!(s > 0.0 && s.is_finite());
    }
}
