//! Geometric analysis of implicit ordinary differential equations.
//!
//! An implicit system `F(t, u, u', …, u^(q)) = 0` is treated as a zero set in
//! a jet space with coordinates `(t, u^α_k)`. The crate builds the field of
//! directions tangent to that zero set and compatible with the contact
//! structure, classifies points by how that field degenerates, integrates
//! generalized solutions through points where classical solvability fails,
//! computes local Taylor models of invariant manifolds at stationary points
//! of the induced vector field, and renders evenly spaced streamline
//! portraits of the resulting geometry.
//!
//! Modules build on each other roughly bottom-up:
//!
//! - [`expr`]: symbolic expression trees, parsing, exact differentiation;
//! - [`jet`]: jet-space signatures, points, contact fields, prolongation;
//! - [`linalg`]: rank decisions, Schur-based splitting, Sylvester solves;
//! - [`vessiot`]: the direction field on the zero set and point classification;
//! - [`integrate`]: arclength integration of generalized solutions;
//! - [`quasilinear`]: detection of quasi-linear structure and the associated
//!   polynomial vector field on the base space;
//! - [`poly`]: truncated multivariate Taylor arithmetic;
//! - [`invman`]: stationary points, spectral splitting, and Taylor models of
//!   invariant manifolds;
//! - [`streamlines`]: evenly spaced streamline portraits and SVG output.

pub mod expr;
pub mod field;
pub mod integrate;
pub mod invman;
pub mod jet;
pub mod linalg;
pub mod poly;
pub mod quasilinear;
pub mod streamlines;
pub mod vessiot;

pub use expr::{EquationSystem, Expr};
pub use jet::{JetPoint, JetSpec};
