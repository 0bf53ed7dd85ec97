//! The field of admissible directions on the zero set of an implicit system.
//!
//! At a point ρ of the zero set, a direction tangent to the zero set and
//! compatible with the contact structure has the form `a·C + Σ b_α·V_α`,
//! where `C` is the transversal contact field and `V_α` the vertical fields
//! along the top-order coordinates. The coefficients must satisfy
//! `A a + B b = 0` with `A_i = C(F_i)(ρ)` and `B_iα = V_α(F_i)(ρ)`.
//!
//! The solution space of that linear system drives everything: its dimension
//! and the rank of `B` classify the point, its one-dimensional case yields
//! the direction a generalized solution follows, and following that
//! direction across the zero set is integration.

use crate::expr::{EquationSystem, EvalError, Expr};
use crate::jet::{self, JetPoint, JetVar};
use crate::linalg::{self, RankResult};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Classification of a zero-set point by the degeneracy of its admissible
/// directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    /// One admissible direction, transversal: a classical solution passes.
    Regular,
    /// One admissible direction, vertical: a generalized solution passes but
    /// its `t`-parametrization breaks down.
    RegularSingular,
    /// More than one admissible direction: the field itself degenerates.
    IrregularSingular,
}

impl std::fmt::Display for PointClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PointClass::Regular => "regular",
            PointClass::RegularSingular => "regular singular",
            PointClass::IrregularSingular => "irregular singular",
        })
    }
}

/// Full outcome of a classification, including the evidence.
#[derive(Debug, Clone)]
pub struct Classification {
    pub class: PointClass,
    /// Rank of the stacked matrix `[A | B]`.
    pub rank_ab: usize,
    /// Rank of the vertical block `B`.
    pub rank_b: usize,
    /// Dimension of the admissible direction space, `(m+1) − rank_ab`.
    pub nullity: usize,
    /// Absolute singular-value threshold the ranks were decided at.
    pub threshold: f64,
    /// Singular values of `[A | B]`, descending.
    pub sigma_ab: Vec<f64>,
    /// Singular values of `B`, descending.
    pub sigma_b: Vec<f64>,
}

/// Failures of direction-field computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VessiotError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(
        "rank decision indeterminate: singular value {sigma:.3e} lies within a factor \
         {band} of the threshold {threshold:.3e}"
    )]
    RankIndeterminate { sigma: f64, threshold: f64, band: f64 },
    #[error("no admissible direction: [A|B] has full column rank {rank}")]
    NoAdmissibleDirection { rank: usize },
    #[error("direction continuation became orthogonal to its predecessor (alignment {alignment:.3e})")]
    OrientationFlip { alignment: f64 },
    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: u32, residual: f64 },
    #[error("direction field is undefined at an irregular singular point")]
    IrregularPoint,
}

/// Tolerances for rank decisions.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyOpts {
    /// Relative tolerance applied to the larger of the matrix scale and the
    /// full Jacobian scale.
    pub tol: f64,
    /// Width of the indeterminate guard band, as a factor around the
    /// threshold.
    pub band: f64,
}

impl Default for ClassifyOpts {
    fn default() -> Self {
        ClassifyOpts {
            tol: 1e-8,
            band: 10.0,
        }
    }
}

/// The evaluated contact matrices at one point.
#[derive(Debug, Clone)]
pub struct ContactMatrices {
    /// `A_i = C(F_i)`, the transversal contact derivative of each equation.
    pub a: DVector<f64>,
    /// `B_iα = V_α(F_i)`, the vertical derivatives.
    pub b: DMatrix<f64>,
    /// Scale the rank threshold is relative to: the larger of `‖[A|B]‖₂`
    /// and `‖dF‖_F`, with the full Jacobian included so exact singularities
    /// of a well-scaled system do not masquerade as full-rank noise.
    pub scale: f64,
}

impl ContactMatrices {
    /// Stacked matrix `[A | B]`, one row per equation.
    pub fn stacked(&self) -> DMatrix<f64> {
        let k = self.a.len();
        let m = self.b.ncols();
        let mut ab = DMatrix::zeros(k, m + 1);
        ab.view_mut((0, 0), (k, 1)).copy_from(&self.a);
        ab.view_mut((0, 1), (k, m)).copy_from(&self.b);
        ab
    }
}

/// Evaluate the contact matrices of a system at a point.
pub fn contact_matrices(
    sys: &EquationSystem,
    p: &JetPoint,
) -> Result<ContactMatrices, VessiotError> {
    let spec = sys.spec();
    let k = sys.k();
    let m = spec.m as usize;
    let mut a = DVector::zeros(k);
    let mut b = DMatrix::zeros(k, m);
    for i in 0..k {
        a[i] = jet::apply_contact_trans(&sys.equations()[i], p)?;
        for alpha in 1..=spec.m {
            b[(i, alpha as usize - 1)] =
                jet::apply_contact_vertical(&sys.equations()[i], p, alpha)?;
        }
    }
    let jac_norm = sys.jacobian(p)?.norm();
    let mut ab_norm_sq = a.norm_squared() + b.norm_squared();
    if !ab_norm_sq.is_finite() {
        ab_norm_sq = f64::MAX;
    }
    let scale = ab_norm_sq.sqrt().max(jac_norm).max(f64::MIN_POSITIVE);
    Ok(ContactMatrices { a, b, scale })
}

fn checked_rank(
    sigma: &[f64],
    threshold: f64,
    band: f64,
) -> Result<usize, VessiotError> {
    match linalg::decide_rank(sigma, threshold, band) {
        RankResult::Definite(r) => Ok(r),
        RankResult::Indeterminate { sigma } => Err(VessiotError::RankIndeterminate {
            sigma,
            threshold,
            band,
        }),
    }
}

/// Classify a zero-set point by the rank structure of its contact matrices.
pub fn classify(
    sys: &EquationSystem,
    p: &JetPoint,
    opts: &ClassifyOpts,
) -> Result<Classification, VessiotError> {
    let cm = contact_matrices(sys, p)?;
    let m = cm.b.ncols();
    let ab = cm.stacked();
    let (sigma_ab, _) = linalg::full_right_svd(&ab);
    let (sigma_b, _) = linalg::full_right_svd(&cm.b);
    let threshold = opts.tol * cm.scale;
    let rank_ab = checked_rank(&sigma_ab, threshold, opts.band)?;
    let rank_b = checked_rank(&sigma_b, threshold, opts.band)?;
    let nullity = m + 1 - rank_ab;
    let class = match nullity {
        0 => return Err(VessiotError::NoAdmissibleDirection { rank: rank_ab }),
        1 => {
            if rank_b == rank_ab {
                PointClass::Regular
            } else {
                PointClass::RegularSingular
            }
        }
        _ => PointClass::IrregularSingular,
    };
    Ok(Classification {
        class,
        rank_ab,
        rank_b,
        nullity,
        threshold,
        sigma_ab,
        sigma_b,
    })
}

// ---------------------------------------------------------------------------
// Directions.
// ---------------------------------------------------------------------------

/// A unit admissible direction: coefficients `(a, b)` with `a² + ‖b‖² = 1`
/// of the combination `a·C + Σ b_α·V_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub a: f64,
    pub b: DVector<f64>,
}

impl Direction {
    pub fn from_vec(v: &DVector<f64>) -> Direction {
        Direction {
            a: v[0],
            b: v.rows(1, v.len() - 1).into_owned(),
        }
    }

    /// Coefficients as one `(m+1)`-vector, `a` first.
    pub fn as_vec(&self) -> DVector<f64> {
        let mut v = DVector::zeros(1 + self.b.len());
        v[0] = self.a;
        v.rows_mut(1, self.b.len()).copy_from(&self.b);
        v
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.a * other.a + self.b.dot(&other.b)
    }

    pub fn flipped(&self) -> Direction {
        Direction {
            a: -self.a,
            b: -&self.b,
        }
    }

    fn normalized(&self) -> Direction {
        let n = (self.a * self.a + self.b.norm_squared()).sqrt();
        Direction {
            a: self.a / n,
            b: &self.b / n,
        }
    }

    /// The ambient velocity vector of this direction at a point: the `t`
    /// slot carries `a`, each sub-top derivative slot carries `a·u^α_{j+1}`,
    /// and each top slot carries `b_α`.
    pub fn ambient(&self, p: &JetPoint) -> Vec<f64> {
        let spec = p.spec();
        let mut v = vec![0.0; spec.ambient_dim()];
        v[0] = self.a;
        for alpha in 1..=spec.m {
            for j in 0..spec.q {
                v[spec.index(alpha, j)] = self.a * p.get(alpha, j + 1);
            }
            v[spec.index(alpha, spec.q)] = self.b[alpha as usize - 1];
        }
        v
    }

    /// Orient canonically: forward in `t` when the direction is transversal,
    /// otherwise by the sign of the largest vertical component.
    fn canonical(&self) -> Direction {
        let flip = if self.a.abs() > 1e-10 {
            self.a < 0.0
        } else {
            let lead = self
                .b
                .iter()
                .cloned()
                .max_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap())
                .unwrap_or(0.0);
            lead < 0.0
        };
        if flip {
            self.flipped()
        } else {
            self.clone()
        }
    }
}

/// Minimum `|⟨new, previous⟩|` below which continuation refuses to pick an
/// orientation.
const ORIENTATION_TOL: f64 = 1e-3;
/// Below this |alignment| the continuation made a sharp turn worth flagging;
/// a plain sign disagreement (|alignment| near 1) is routine — the nullspace
/// routine's sign is arbitrary — and is fixed silently.
const MARGINAL_ALIGNMENT: f64 = 0.5;

fn orient(dir: Direction, prev: Option<&Direction>) -> Result<Direction, VessiotError> {
    match prev {
        None => Ok(dir.canonical()),
        Some(prev) => {
            let d = dir.dot(prev);
            if d.abs() < ORIENTATION_TOL {
                return Err(VessiotError::OrientationFlip { alignment: d });
            }
            if d.abs() < MARGINAL_ALIGNMENT {
                log::warn!(
                    "admissible direction continuation is marginal (alignment {d:.3e})"
                );
            }
            if d < 0.0 {
                log::debug!("direction sign disagreed with its predecessor (alignment {d:.3e}); reorienting");
                Ok(dir.flipped())
            } else {
                Ok(dir)
            }
        }
    }
}

/// The admissible direction at a point whose direction space is
/// one-dimensional, computed from scratch via the nullspace of `[A | B]`.
/// `prev` fixes the orientation; without it the canonical orientation is
/// chosen.
pub fn initial_direction(
    sys: &EquationSystem,
    p: &JetPoint,
    opts: &ClassifyOpts,
    prev: Option<&Direction>,
) -> Result<Direction, VessiotError> {
    let cm = contact_matrices(sys, p)?;
    let ab = cm.stacked();
    let (sigma, vt) = linalg::full_right_svd(&ab);
    let threshold = opts.tol * cm.scale;
    let rank = checked_rank(&sigma, threshold, opts.band)?;
    let m = cm.b.ncols();
    match (m + 1).saturating_sub(rank) {
        0 => Err(VessiotError::NoAdmissibleDirection { rank }),
        1 => {
            let v = vt.row(m).transpose();
            orient(Direction::from_vec(&v).normalized(), prev)
        }
        _ => Err(VessiotError::IrregularPoint),
    }
}

/// Options for the unit-norm continuation iteration.
#[derive(Debug, Clone, Copy)]
pub struct ContinuationOpts {
    pub max_iter: u32,
    pub tol: f64,
}

impl Default for ContinuationOpts {
    fn default() -> Self {
        ContinuationOpts {
            max_iter: 25,
            tol: 1e-12,
        }
    }
}

/// Continue the admissible direction to a nearby point by a least-squares
/// Newton iteration on the system `{A a + B b = 0, a² + ‖b‖² = 1}`, warm
/// started from `prev`. The result is oriented along `prev`.
pub fn continued_direction(
    sys: &EquationSystem,
    p: &JetPoint,
    prev: &Direction,
    opts: &ContinuationOpts,
) -> Result<Direction, VessiotError> {
    let cm = contact_matrices(sys, p)?;
    let ab = cm.stacked();
    let k = ab.nrows();
    let m = cm.b.ncols();
    let scale = 1.0 + cm.scale;
    let mut v = prev.as_vec();
    for _ in 0..opts.max_iter {
        let lin = &ab * &v;
        let mut g = DVector::zeros(k + 1);
        g.rows_mut(0, k).copy_from(&lin);
        g[k] = v.norm_squared() - 1.0;
        if g.amax() <= opts.tol * scale {
            let dir = Direction::from_vec(&v).normalized();
            return orient(dir, Some(prev));
        }
        let mut jac = DMatrix::zeros(k + 1, m + 1);
        jac.view_mut((0, 0), (k, m + 1)).copy_from(&ab);
        jac.row_mut(k).copy_from(&(2.0 * v.transpose()));
        let Some(step) = linalg::least_squares(&jac, &g) else {
            return Err(VessiotError::NoConvergence {
                iterations: opts.max_iter,
                residual: g.norm(),
            });
        };
        v -= step;
    }
    let residual = {
        let lin = &ab * &v;
        (lin.norm_squared() + (v.norm_squared() - 1.0).powi(2)).sqrt()
    };
    Err(VessiotError::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Symbolic direction field for scalar equations.
// ---------------------------------------------------------------------------

/// Ambient components, as expressions, of the direction field of a single
/// scalar equation (`k = m = 1`): the vector
/// `(B, B·u1_1, …, B·u1_q, −A)` read off the coefficient solution
/// `(a, b) = (B, −A)` of `A a + B b = 0`, where `A = C(F)` and
/// `B = V₁(F)`. Any smooth scalar multiple spans the same field.
pub fn scalar_field_exprs(sys: &EquationSystem) -> Vec<Expr> {
    let spec = sys.spec();
    assert_eq!(
        (sys.k(), spec.m),
        (1, 1),
        "symbolic direction field requires a single scalar equation"
    );
    let parts = sys.partials(0);
    // A = ∂F/∂t + Σ_{j<q} u1_{j+1} ∂F/∂u1_j.
    let mut a = parts.by_coord[0].clone();
    for j in 0..spec.q {
        let next = Expr::var(JetVar::U {
            alpha: 1,
            order: j + 1,
        });
        a = Expr::add(
            a,
            Expr::mul(next, parts.by_coord[spec.index(1, j)].clone()),
        );
    }
    // B = ∂F/∂u1_q.
    let b = parts.by_coord[spec.index(1, spec.q)].clone();
    let mut comps = Vec::with_capacity(spec.ambient_dim());
    comps.push(b.clone());
    for j in 0..spec.q {
        let next = Expr::var(JetVar::U {
            alpha: 1,
            order: j + 1,
        });
        comps.push(Expr::mul(b.clone(), next));
    }
    comps.push(Expr::neg(a));
    comps
}

// ---------------------------------------------------------------------------
// Projection back onto the zero set.
// ---------------------------------------------------------------------------

/// Options for Gauss–Newton projection onto the zero set.
#[derive(Debug, Clone, Copy)]
pub struct ProjectOpts {
    /// Residual norm below which a point counts as on the zero set.
    pub tol_residual: f64,
    pub max_iter: u32,
}

impl Default for ProjectOpts {
    fn default() -> Self {
        ProjectOpts {
            tol_residual: 1e-9,
            max_iter: 20,
        }
    }
}

/// Pull a nearby point back onto the zero set by Gauss–Newton least-squares
/// steps on the residual.
pub fn project_to_manifold(
    sys: &EquationSystem,
    p: &JetPoint,
    opts: &ProjectOpts,
) -> Result<JetPoint, VessiotError> {
    let free = vec![true; p.dim()];
    project_constrained(sys, p, &free, opts)
}

/// Projection with a coordinate mask: only coordinates flagged `true` in
/// `free` may move.
pub fn project_constrained(
    sys: &EquationSystem,
    p: &JetPoint,
    free: &[bool],
    opts: &ProjectOpts,
) -> Result<JetPoint, VessiotError> {
    assert_eq!(free.len(), p.dim());
    let free_idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let mut q = p.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let r = DVector::from_vec(sys.residual(&q)?);
        residual = r.norm();
        if residual <= opts.tol_residual {
            return Ok(q);
        }
        let jac = sys.jacobian(&q)?;
        let mut jf = DMatrix::zeros(jac.nrows(), free_idx.len());
        for (col, &i) in free_idx.iter().enumerate() {
            jf.column_mut(col).copy_from(&jac.column(i));
        }
        let Some(step) = linalg::least_squares(&jf, &r) else {
            break;
        };
        for (col, &i) in free_idx.iter().enumerate() {
            q.coords_mut()[i] -= step[col];
        }
    }
    // One final residual check: the last step may have landed the point.
    let r = sys.residual_norm(&q)?;
    if r <= opts.tol_residual {
        return Ok(q);
    }
    Err(VessiotError::NoConvergence {
        iterations: opts.max_iter,
        residual: residual.min(r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::load_equation_system;
    use crate::jet::JetSpec;

    fn circle() -> EquationSystem {
        load_equation_system(r#"{"m":1,"q":1,"equations":["u1_1^2 + u1_0^2 - 1"]}"#).unwrap()
    }

    fn fold() -> EquationSystem {
        load_equation_system(r#"{"m":1,"q":1,"equations":["u1_1^2 - t"]}"#).unwrap()
    }

    fn pt(sys: &EquationSystem, coords: &[f64]) -> JetPoint {
        JetPoint::new(sys.spec(), coords.to_vec())
    }

    #[test]
    fn classifies_regular_point() {
        let sys = circle();
        let c = classify(&sys, &pt(&sys, &[0.3, 0.0, 1.0]), &Default::default()).unwrap();
        assert_eq!(c.class, PointClass::Regular);
        assert_eq!((c.rank_ab, c.rank_b, c.nullity), (1, 1, 1));
    }

    #[test]
    fn classifies_regular_singular_point() {
        // At t = 0, u̇ = 0 the vertical derivative vanishes while the
        // transversal one stays at −1.
        let sys = fold();
        let c = classify(&sys, &pt(&sys, &[0.0, 0.7, 0.0]), &Default::default()).unwrap();
        assert_eq!(c.class, PointClass::RegularSingular);
        assert_eq!((c.rank_ab, c.rank_b, c.nullity), (1, 0, 1));
    }

    #[test]
    fn classifies_irregular_point() {
        // Both contact derivatives vanish at the equator point (u, u̇) = (1, 0),
        // yet the full gradient keeps the scale healthy, so the zero ranks are
        // trusted.
        let sys = circle();
        let c = classify(&sys, &pt(&sys, &[5.0, 1.0, 0.0]), &Default::default()).unwrap();
        assert_eq!(c.class, PointClass::IrregularSingular);
        assert_eq!((c.rank_ab, c.nullity), (0, 2));
        assert!((c.threshold - 2e-8).abs() < 1e-12);
    }

    #[test]
    fn near_singular_rank_is_indeterminate() {
        let sys = circle();
        let s = 1e-8f64;
        let u = (1.0 - s * s).sqrt();
        let err = classify(&sys, &pt(&sys, &[0.0, u, s]), &Default::default()).unwrap_err();
        assert!(matches!(err, VessiotError::RankIndeterminate { .. }));
    }

    #[test]
    fn direction_at_regular_point_matches_hand_value() {
        // A = −1, B = 2 at (1, ·, 1): nullspace of [−1 2] is spanned by
        // (2, 1)/√5, oriented forward in t.
        let sys = fold();
        let d = initial_direction(&sys, &pt(&sys, &[1.0, 0.2, 1.0]), &Default::default(), None)
            .unwrap();
        let s5 = 5.0f64.sqrt();
        assert!((d.a - 2.0 / s5).abs() < 1e-12);
        assert!((d.b[0] - 1.0 / s5).abs() < 1e-12);
        let amb = d.ambient(&pt(&sys, &[1.0, 0.2, 1.0]));
        assert!((amb[0] - 2.0 / s5).abs() < 1e-12);
        assert!((amb[1] - 2.0 / s5).abs() < 1e-12); // a · u̇ with u̇ = 1
        assert!((amb[2] - 1.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn direction_at_regular_singular_point_is_vertical() {
        let sys = fold();
        let d = initial_direction(&sys, &pt(&sys, &[0.0, 0.7, 0.0]), &Default::default(), None)
            .unwrap();
        assert!(d.a.abs() < 1e-12);
        assert!((d.b[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direction_fails_at_irregular_point() {
        let sys = circle();
        let err = initial_direction(
            &sys,
            &pt(&sys, &[0.0, 1.0, 0.0]),
            &Default::default(),
            None,
        )
        .unwrap_err();
        assert_eq!(err, VessiotError::IrregularPoint);
    }

    #[test]
    fn continuation_tracks_nullspace() {
        let sys = circle();
        let p0 = pt(&sys, &[0.0, 0.0, 1.0]);
        let d0 = initial_direction(&sys, &p0, &Default::default(), None).unwrap();
        // Step along the zero set a little and continue.
        let p1 = pt(&sys, &[0.1, 0.05, (1.0f64 - 0.0025).sqrt()]);
        let d1 = continued_direction(&sys, &p1, &d0, &Default::default()).unwrap();
        let fresh = initial_direction(&sys, &p1, &Default::default(), Some(&d0)).unwrap();
        assert!((d1.dot(&fresh).abs() - 1.0).abs() < 1e-9);
        assert!(d1.dot(&d0) > 0.9);
        // Unit norm and admissibility.
        let cm = contact_matrices(&sys, &p1).unwrap();
        let v = d1.as_vec();
        assert!((v.norm() - 1.0).abs() < 1e-10);
        assert!((cm.stacked() * v).norm() < 1e-9);
    }

    #[test]
    fn continuation_respects_warm_start_sign() {
        let sys = fold();
        let p = pt(&sys, &[1.0, 0.2, 1.0]);
        let forward = initial_direction(&sys, &p, &Default::default(), None).unwrap();
        let back = continued_direction(&sys, &p, &forward.flipped(), &Default::default()).unwrap();
        assert!(back.dot(&forward.flipped()) > 0.999);
    }

    #[test]
    fn orthogonal_predecessor_is_refused() {
        let sys = fold();
        let p = pt(&sys, &[1.0, 0.2, 1.0]);
        let s5 = 5.0f64.sqrt();
        let prev = Direction {
            a: -1.0 / s5,
            b: DVector::from_vec(vec![2.0 / s5]),
        };
        // Orientation cannot be inherited across a right angle: the
        // from-scratch route reports the ambiguity...
        let err = initial_direction(&sys, &p, &Default::default(), Some(&prev)).unwrap_err();
        assert!(matches!(err, VessiotError::OrientationFlip { .. }));
        // ...and the warm-started iteration, whose Jacobian degenerates
        // there, refuses one way or the other rather than guessing.
        assert!(continued_direction(&sys, &p, &prev, &Default::default()).is_err());
    }

    #[test]
    fn scalar_field_components_match_hand_formulas() {
        // F = u̇² + u² − 1: A = 2uu̇, B = 2u̇; field = (2u̇, 2u̇·u̇, −2uu̇).
        let sys = circle();
        let comps = scalar_field_exprs(&sys);
        assert_eq!(comps.len(), 3);
        let p = pt(&sys, &[0.0, 0.6, 0.8]);
        assert!((comps[0].eval(&p).unwrap() - 1.6).abs() < 1e-14);
        assert!((comps[1].eval(&p).unwrap() - 1.28).abs() < 1e-14);
        assert!((comps[2].eval(&p).unwrap() + 0.96).abs() < 1e-14);
    }

    #[test]
    fn scalar_field_second_order_layout() {
        // F = u1_2 − u1_0 (q = 2): A = u1_1·(−1), B = 1;
        // field = (1, u1_1, u1_2, u1_1).
        let sys =
            load_equation_system(r#"{"m":1,"q":2,"equations":["u1_2 - u1_0"]}"#).unwrap();
        let comps = scalar_field_exprs(&sys);
        assert_eq!(comps.len(), 4);
        let p = JetPoint::new(JetSpec::new(1, 2), vec![0.0, 5.0, 7.0, 5.0]);
        let vals: Vec<f64> = comps.iter().map(|c| c.eval(&p).unwrap()).collect();
        assert_eq!(vals, vec![1.0, 7.0, 5.0, 7.0]);
    }

    #[test]
    fn projection_restores_membership() {
        let sys = circle();
        let off = pt(&sys, &[0.0, 1.08, 0.11]);
        let on = project_to_manifold(&sys, &off, &Default::default()).unwrap();
        assert!(sys.residual_norm(&on).unwrap() <= 1e-9);
        assert!(off.distance(&on) < 0.2);
    }

    #[test]
    fn constrained_projection_moves_only_free_coordinates() {
        let sys = circle();
        let off = pt(&sys, &[0.25, 0.6, 0.9]);
        let free = [false, false, true];
        let on = project_constrained(&sys, &off, &free, &Default::default()).unwrap();
        assert_eq!(on.t(), 0.25);
        assert_eq!(on.get(1, 0), 0.6);
        assert!((on.get(1, 1) - 0.8).abs() < 1e-9);
    }

    #[test]
    fn constrained_projection_reports_failure() {
        // With u fixed at 1.2 the circle equation has no solution over the
        // free coordinate u̇.
        let sys = circle();
        let off = pt(&sys, &[0.0, 1.2, 0.5]);
        let free = [false, false, true];
        let err = project_constrained(&sys, &off, &free, &Default::default()).unwrap_err();
        assert!(matches!(err, VessiotError::NoConvergence { .. }));
    }
}
