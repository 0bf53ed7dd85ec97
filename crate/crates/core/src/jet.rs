//! Jet-bundle coordinates and the contact structure.
//!
//! A point of the order-`q` jet bundle over one independent variable `t` and
//! `m` dependent variables is stored flat as
//! `(t, u1_0 … u1_q, u2_0 … u2_q, …)`, so the ambient dimension is
//! `(q+1)·m + 1` and every projection or Jacobian is plain index arithmetic.
//!
//! The contact structure is carried by the transversal field
//! `C = ∂t + Σ_{α, j<q} u^α_{j+1} ∂/∂u^α_j` and the vertical fields
//! `C_α = ∂/∂u^α_q`; applying them to a scalar expression is exact symbolic
//! differentiation followed by evaluation.

use crate::expr::{EvalError, Expr};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Shape of a jet bundle: `m` dependent variables, derivative order `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JetSpec {
    pub m: u32,
    pub q: u32,
}

impl JetSpec {
    pub fn new(m: u32, q: u32) -> Self {
        assert!(m >= 1, "at least one dependent variable");
        Self { m, q }
    }

    /// Dimension of the ambient coordinate space, `(q+1)·m + 1`.
    pub fn ambient_dim(self) -> usize {
        (self.q as usize + 1) * self.m as usize + 1
    }

    /// Flat index of `u^alpha_k` (`alpha` is 1-based).
    pub fn index(self, alpha: u32, k: u32) -> usize {
        debug_assert!(alpha >= 1 && alpha <= self.m && k <= self.q);
        1 + (alpha as usize - 1) * (self.q as usize + 1) + k as usize
    }

    /// Variable at flat index `i` (0 is `t`).
    pub fn var_at(self, i: usize) -> JetVar {
        assert!(i < self.ambient_dim());
        if i == 0 {
            JetVar::T
        } else {
            let per = self.q as usize + 1;
            let alpha = (i - 1) / per + 1;
            let order = (i - 1) % per;
            JetVar::U {
                alpha: alpha as u32,
                order: order as u32,
            }
        }
    }

    /// All variables in flat coordinate order.
    pub fn vars(self) -> Vec<JetVar> {
        (0..self.ambient_dim()).map(|i| self.var_at(i)).collect()
    }

    /// Whether `var` exists in this signature.
    pub fn contains(self, var: JetVar) -> bool {
        match var {
            JetVar::T => true,
            JetVar::U { alpha, order } => alpha >= 1 && alpha <= self.m && order <= self.q,
        }
    }
}

/// A coordinate of the jet bundle: time `t` or a derivative coordinate
/// `u^alpha_order` (`alpha` 1-based, `order` 0 meaning the function value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JetVar {
    T,
    U { alpha: u32, order: u32 },
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JetVar::T => write!(f, "t"),
            JetVar::U { alpha, order } => write!(f, "u{alpha}_{order}"),
        }
    }
}

/// A point of the jet bundle, stored as a flat coordinate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    spec: JetSpec,
    coords: Vec<f64>,
}

impl JetPoint {
    pub fn new(spec: JetSpec, coords: Vec<f64>) -> Self {
        assert_eq!(
            coords.len(),
            spec.ambient_dim(),
            "coordinate vector must match the ambient dimension"
        );
        Self { spec, coords }
    }

    pub fn zero(spec: JetSpec) -> Self {
        Self {
            spec,
            coords: vec![0.0; spec.ambient_dim()],
        }
    }

    pub fn spec(&self) -> JetSpec {
        self.spec
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn t(&self) -> f64 {
        self.coords[0]
    }

    pub fn get(&self, alpha: u32, k: u32) -> f64 {
        self.coords[self.spec.index(alpha, k)]
    }

    pub fn set(&mut self, alpha: u32, k: u32, value: f64) {
        let i = self.spec.index(alpha, k);
        self.coords[i] = value;
    }

    pub fn set_t(&mut self, value: f64) {
        self.coords[0] = value;
    }

    /// Value of a named coordinate.
    pub fn var(&self, v: JetVar) -> Option<f64> {
        match v {
            JetVar::T => Some(self.coords[0]),
            JetVar::U { alpha, order } => {
                if self.spec.contains(v) {
                    Some(self.get(alpha, order))
                } else {
                    None
                }
            }
        }
    }

    /// Euclidean distance to another point of the same shape.
    pub fn distance(&self, other: &JetPoint) -> f64 {
        assert_eq!(self.spec, other.spec);
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// The point translated by `h` times an ambient vector.
    pub fn advanced(&self, direction: &[f64], h: f64) -> JetPoint {
        assert_eq!(direction.len(), self.coords.len());
        let coords = self
            .coords
            .iter()
            .zip(direction)
            .map(|(x, d)| x + h * d)
            .collect();
        JetPoint {
            spec: self.spec,
            coords,
        }
    }
}

/// Ambient coefficient vector of the transversal contact field at `p`:
/// 1 in the `t` slot, `u^alpha_{j+1}` in the `u^alpha_j` slot for `j < q`,
/// 0 in the top-order slots.
pub fn contact_trans_coeffs(p: &JetPoint) -> Vec<f64> {
    let spec = p.spec();
    let mut v = vec![0.0; spec.ambient_dim()];
    v[0] = 1.0;
    for alpha in 1..=spec.m {
        for j in 0..spec.q {
            v[spec.index(alpha, j)] = p.get(alpha, j + 1);
        }
    }
    v
}

/// Ambient coefficient vector of the vertical contact field `∂/∂u^alpha_q`.
pub fn contact_vertical_coeffs(spec: JetSpec, alpha: u32) -> Vec<f64> {
    let mut v = vec![0.0; spec.ambient_dim()];
    v[spec.index(alpha, spec.q)] = 1.0;
    v
}

/// Apply the transversal contact field to a scalar expression at `p`:
/// `∂f/∂t + Σ_{α, j<q} u^α_{j+1} · ∂f/∂u^α_j`.
pub fn apply_contact_trans(f: &Expr, p: &JetPoint) -> Result<f64, EvalError> {
    let spec = p.spec();
    let mut acc = f.diff(JetVar::T).eval(p)?;
    for alpha in 1..=spec.m {
        for j in 0..spec.q {
            let partial = f.diff(JetVar::U { alpha, order: j });
            acc += p.get(alpha, j + 1) * partial.eval(p)?;
        }
    }
    Ok(acc)
}

/// Apply the vertical contact field `∂/∂u^alpha_q` to `f` at `p`.
pub fn apply_contact_vertical(f: &Expr, p: &JetPoint, alpha: u32) -> Result<f64, EvalError> {
    let spec = p.spec();
    f.diff(JetVar::U {
        alpha,
        order: spec.q,
    })
    .eval(p)
}

/// Order-`q` jet of a polynomial section at `t`: each entry of `sections` is
/// the ascending-power coefficient vector of one dependent variable.
pub fn prolong_section(sections: &[Vec<f64>], t: f64, q: u32) -> JetPoint {
    assert!(!sections.is_empty(), "need at least one section");
    let spec = JetSpec::new(sections.len() as u32, q);
    let mut p = JetPoint::zero(spec);
    p.set_t(t);
    for (a, coeffs) in sections.iter().enumerate() {
        let alpha = a as u32 + 1;
        let mut deriv = coeffs.clone();
        for k in 0..=q {
            p.set(alpha, k, eval_poly(&deriv, t));
            deriv = diff_poly(&deriv);
        }
    }
    p
}

/// Truncate a jet point to order `r ≤ q`, keeping `t` and all `u^alpha_k`
/// with `k ≤ r`.
pub fn project_jet(p: &JetPoint, r: u32) -> JetPoint {
    let spec = p.spec();
    assert!(r <= spec.q, "projection order must not exceed the jet order");
    let lower = JetSpec::new(spec.m, r);
    let mut out = JetPoint::zero(lower);
    out.set_t(p.t());
    for alpha in 1..=spec.m {
        for k in 0..=r {
            out.set(alpha, k, p.get(alpha, k));
        }
    }
    out
}

fn eval_poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn diff_poly(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| i as f64 * c)
        .collect()
}
