//! Vector fields on flat coordinate spaces.
//!
//! Downstream consumers need two views of a field: a numeric one (evaluate
//! the velocity at a coordinate tuple, for integration and portraits) and a
//! symbolic one (expression components with exact partial derivatives, for
//! Taylor models and stationary-point analysis). [`SymbolicField`] provides
//! both; the [`VectorField`] trait is the minimal numeric interface.

use crate::expr::{EvalError, Expr};
use crate::jet::{JetPoint, JetSpec};
use nalgebra::DMatrix;
use thiserror::Error;

/// Failures while evaluating or following a field.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("field speed {speed:.3e} fell below the stall threshold")]
    Stall { speed: f64 },
}

/// Minimal numeric interface: a velocity vector at every point of R^n.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;
}

/// A field whose components are expressions over the flat coordinates of a
/// jet signature. Partial derivatives are prepared once at construction.
#[derive(Debug, Clone)]
pub struct SymbolicField {
    spec: JetSpec,
    components: Vec<Expr>,
    partials: Vec<Vec<Expr>>,
}

impl SymbolicField {
    pub fn new(spec: JetSpec, components: Vec<Expr>) -> SymbolicField {
        assert_eq!(
            components.len(),
            spec.ambient_dim(),
            "one component per ambient coordinate"
        );
        let vars = spec.vars();
        let partials = components
            .iter()
            .map(|c| vars.iter().map(|&v| c.diff(v)).collect())
            .collect();
        SymbolicField {
            spec,
            components,
            partials,
        }
    }

    pub fn spec(&self) -> JetSpec {
        self.spec
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval_at(&self, p: &JetPoint) -> Result<Vec<f64>, EvalError> {
        self.components.iter().map(|c| c.eval(p)).collect()
    }

    /// Jacobian matrix `J_ij = ∂X_i/∂x_j` at a point.
    pub fn jacobian(&self, p: &JetPoint) -> Result<DMatrix<f64>, EvalError> {
        let n = self.spec.ambient_dim();
        let mut out = DMatrix::zeros(n, n);
        for (i, row) in self.partials.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                out[(i, j)] = d.eval(p)?;
            }
        }
        Ok(out)
    }

    pub fn point(&self, coords: &[f64]) -> JetPoint {
        JetPoint::new(self.spec, coords.to_vec())
    }
}

impl VectorField for SymbolicField {
    fn dim(&self) -> usize {
        self.spec.ambient_dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let p = JetPoint::new(self.spec, x.to_vec());
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(&p)?;
        }
        Ok(())
    }
}

/// A field defined by a closure; convenient for tests and analytic examples.
pub struct FnField<F: Fn(&[f64], &mut [f64])> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.f)(x, out);
        Ok(())
    }
}

/// One Runge–Kutta step of the *unit-speed* flow of a field: the velocity is
/// normalized at every stage, so the step parameter is ambient arclength.
/// Negative `h` follows the field backwards. Fails with [`FieldError::Stall`]
/// when the speed at any stage drops below `min_speed`.
pub fn rk4_unit_step<V: VectorField + ?Sized>(
    field: &V,
    x: &[f64],
    h: f64,
    min_speed: f64,
) -> Result<Vec<f64>, FieldError> {
    let n = field.dim();
    debug_assert_eq!(x.len(), n);
    let stage = |y: &[f64]| -> Result<Vec<f64>, FieldError> {
        let mut v = vec![0.0; n];
        field.eval(y, &mut v)?;
        let speed = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(speed > min_speed) {
            return Err(FieldError::Stall { speed });
        }
        for c in &mut v {
            *c /= speed;
        }
        Ok(v)
    };
    let k1 = stage(x)?;
    let y2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = stage(&y2)?;
    let y3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = stage(&y3)?;
    let y4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = stage(&y4)?;
    Ok((0..n)
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}
