//! Quasi-linear structure: detection and reduction to a polynomial field.
//!
//! A system is quasi-linear when every equation is affine in the top-order
//! derivatives: `F = A(t, u, …, u^(q−1)) · u^(q) − c(t, u, …, u^(q−1))`.
//! For a determined quasi-linear system the admissible directions project to
//! a vector field on the order-`(q−1)` space that needs no division:
//! multiplying the classical solve `u^(q) = A⁻¹ c` by `det A` gives the
//! components `(det A, det A·u^α_{j+1}, …, adj(A)·c)`, which remain smooth
//! across the locus `det A = 0` where classical solvability fails.

use crate::expr::{EquationSystem, Expr};
use crate::field::SymbolicField;
use crate::jet::{JetPoint, JetSpec, JetVar};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Failures of quasi-linearity analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuasilinearError {
    #[error(
        "quasi-linearity is indeterminate: a second derivative of equation {equation} with \
         respect to the top-order variables does not simplify to zero symbolically but \
         vanishes numerically (max sample magnitude {max_sample:.3e})"
    )]
    Indeterminate { equation: usize, max_sample: f64 },
    #[error("system is not quasi-linear: equation {equation} is nonlinear in the top-order variables")]
    NotQuasiLinear { equation: usize },
    #[error("projection requires a determined system (k = m), got k = {k}, m = {m}")]
    RequiresDetermined { k: usize, m: usize },
}

fn top_vars(spec: JetSpec) -> Vec<JetVar> {
    (1..=spec.m)
        .map(|alpha| JetVar::U {
            alpha,
            order: spec.q,
        })
        .collect()
}

/// Largest magnitude a symbolically non-zero second derivative attains over
/// a deterministic random sample, or `None` when too few sample points
/// evaluate cleanly to judge.
fn numeric_magnitude(expr: &Expr, spec: JetSpec, rng: &mut ChaCha8Rng) -> Option<f64> {
    const WANTED: usize = 16;
    const ATTEMPTS: usize = 200;
    let mut max = 0.0f64;
    let mut got = 0;
    for _ in 0..ATTEMPTS {
        let coords: Vec<f64> = (0..spec.ambient_dim())
            .map(|_| rng.random_range(0.25..1.75))
            .collect();
        let p = JetPoint::new(spec, coords);
        if let Ok(v) = expr.eval(&p) {
            max = max.max(v.abs());
            got += 1;
            if got == WANTED {
                return Some(max);
            }
        }
    }
    (got >= 4).then_some(max)
}

/// Decide whether every equation is affine in the top-order derivatives.
///
/// The symbolic route — all second partials with respect to top-order
/// variables simplify to the literal zero — answers `true` on its own. When
/// a second partial survives symbolically, a deterministic randomized
/// evaluation arbitrates: clearly non-zero samples answer `false`, while
/// samples indistinguishable from zero mean the simplifier could not verify
/// what the numbers suggest, and the decision is refused as indeterminate.
pub fn is_quasilinear(sys: &EquationSystem) -> Result<bool, QuasilinearError> {
    let spec = sys.spec();
    let tops = top_vars(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(0x51a5_11ea);
    for (i, f) in sys.equations().iter().enumerate() {
        for va in &tops {
            let first = f.diff(*va);
            for vb in &tops {
                let second = first.diff(*vb);
                if second.is_zero() {
                    continue;
                }
                let Some(max_sample) = numeric_magnitude(&second, spec, &mut rng) else {
                    return Err(QuasilinearError::Indeterminate {
                        equation: i,
                        max_sample: f64::NAN,
                    });
                };
                if max_sample > 1e-9 {
                    return Ok(false);
                }
                return Err(QuasilinearError::Indeterminate {
                    equation: i,
                    max_sample,
                });
            }
        }
    }
    Ok(true)
}

/// Determinant of a square matrix of expressions by cofactor expansion
/// along the first row. Fine for the small systems this crate handles.
fn det_expr(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::constant(1.0),
        1 => m[0][0].clone(),
        _ => {
            let mut acc = Expr::constant(0.0);
            for (j, entry) in m[0].iter().enumerate() {
                if entry.is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expr>> = m[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let term = Expr::mul(entry.clone(), det_expr(&minor));
                acc = if j % 2 == 0 {
                    Expr::add(acc, term)
                } else {
                    Expr::sub(acc, term)
                };
            }
            acc
        }
    }
}

/// Adjugate: `adj(A)_{ij}` is the `(j,i)` cofactor, so `A · adj(A) = det A · I`.
fn adjugate_expr(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    let mut adj = vec![vec![Expr::constant(0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<Expr>> = m
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != j)
                .map(|(_, row)| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != i)
                        .map(|(_, e)| e.clone())
                        .collect()
                })
                .collect();
            let cof = det_expr(&minor);
            adj[i][j] = if (i + j) % 2 == 0 {
                cof
            } else {
                Expr::neg(cof)
            };
        }
    }
    adj
}

/// Project a determined quasi-linear system to its division-free field on
/// the order-`(q−1)` space.
///
/// Writing `F = A·u^(q) − c` with `A` and `c` free of top-order variables,
/// the components over the reduced coordinates `(t, u^α_0, …, u^α_{q−1})`
/// are `det A` in the `t` slot, `det A · u^α_{j+1}` in each slot of order
/// `j < q−1`, and `(adj(A)·c)_α` in the top slots.
pub fn project_field(sys: &EquationSystem) -> Result<SymbolicField, QuasilinearError> {
    let spec = sys.spec();
    let (k, m) = (sys.k(), spec.m as usize);
    if k != m {
        return Err(QuasilinearError::RequiresDetermined { k, m });
    }
    match is_quasilinear(sys)? {
        true => {}
        false => {
            // Identify an offending equation for the report.
            let tops = top_vars(spec);
            for (i, f) in sys.equations().iter().enumerate() {
                for va in &tops {
                    for vb in &tops {
                        if !f.diff(*va).diff(*vb).is_zero() {
                            return Err(QuasilinearError::NotQuasiLinear { equation: i });
                        }
                    }
                }
            }
            unreachable!("non-quasi-linear verdict implies a surviving second derivative");
        }
    }
    let zero = Expr::constant(0.0);
    let tops = top_vars(spec);
    let drop_tops = |e: &Expr| -> Expr {
        tops.iter().fold(e.clone(), |acc, v| acc.substitute(*v, &zero))
    };
    // A_iα = ∂F_i/∂u^α_q with top-order variables normalized away; the
    // substitution is exact because quasi-linearity makes the coefficient
    // independent of them.
    let a: Vec<Vec<Expr>> = sys
        .equations()
        .iter()
        .enumerate()
        .map(|(i, _)| {
            (0..m)
                .map(|al| {
                    drop_tops(&sys.partials(i).by_coord[spec.index(al as u32 + 1, spec.q)])
                })
                .collect()
        })
        .collect();
    // c_i = −F_i with the top-order variables set to zero.
    let c: Vec<Expr> = sys
        .equations()
        .iter()
        .map(|f| Expr::neg(drop_tops(f)))
        .collect();
    let det = det_expr(&a);
    let adj = adjugate_expr(&a);
    let reduced = JetSpec::new(spec.m, spec.q - 1);
    let mut comps = Vec::with_capacity(reduced.ambient_dim());
    comps.push(det.clone());
    for alpha in 1..=spec.m {
        for j in 0..reduced.q {
            comps.push(Expr::mul(
                det.clone(),
                Expr::var(JetVar::U {
                    alpha,
                    order: j + 1,
                }),
            ));
        }
        let alpha_i = alpha as usize - 1;
        let mut entry = Expr::constant(0.0);
        for (beta, cb) in c.iter().enumerate() {
            entry = Expr::add(entry, Expr::mul(adj[alpha_i][beta].clone(), cb.clone()));
        }
        comps.push(entry);
    }
    Ok(SymbolicField::new(reduced, comps))
}
