//! Invariant manifolds at stationary points of a vector field.
//!
//! At a stationary point ξ of a field X the Jacobian J = dX(ξ) splits the
//! tangent space into spectral groups. For a selected group with spectrum
//! not resonating against its complement, an invariant manifold tangent to
//! the selected subspace exists locally and its Taylor model can be computed
//! to any order: writing the field in adapted coordinates (y, z) with
//! decoupled linear blocks A and B, the graph `z = h(y)` is solved degree by
//! degree from the invariance equation `f̃(y, h(y)) = Dh(y)·f_E(y, h(y))`,
//! each degree reducing to one Sylvester equation whose left spectrum is B
//! and whose right spectrum consists of d-fold sums of eigenvalues of A —
//! so exact solvability is precisely non-resonance.

use crate::expr::EvalError;
use crate::field::SymbolicField;
use crate::jet::JetPoint;
use crate::linalg::{self, LinalgError};
use crate::poly::{PolyError, PolyRing, TaylorPoly};
use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

/// Failures of stationary-point and manifold analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvmanError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error(
        "stationary set is degenerate: the Jacobian is singular at a point with field \
         residual {residual:.3e}; the zero is not isolated in the directions of its nullspace"
    )]
    SingularJacobian {
        point: Vec<f64>,
        nullspace: Vec<Vec<f64>>,
        residual: f64,
    },
    #[error("point is not stationary: field residual {residual:.3e}")]
    NotStationary { residual: f64 },
    #[error("spectral groups nearly touch: gap {gap:.3e} between selected and complementary eigenvalues")]
    NearDegenerate { gap: f64 },
    #[error("eigenvalue selector splits the conjugate pair {re} ± {im}i")]
    SelectorSplitsPair { re: f64, im: f64 },
    #[error(
        "resonance at degree {degree}: a {degree}-fold sum of selected eigenvalues meets a \
         complementary eigenvalue, so no polynomial graph of that degree exists"
    )]
    Resonance { degree: u32 },
    #[error("numerical decomposition failed: {0}")]
    Numeric(LinalgError),
}

// ---------------------------------------------------------------------------
// Stationary points.
// ---------------------------------------------------------------------------

/// Options for the damped Newton search for stationary points.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOpts {
    /// Residual norm accepted as zero.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for NewtonOpts {
    fn default() -> Self {
        NewtonOpts {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

/// Find a stationary point of the field near `guess` by damped Newton
/// iteration.
///
/// A singular Jacobian is tolerated as long as progress continues (zeros
/// along non-isolated stationary sets converge linearly). When the iteration
/// stalls *near* a zero with a singular Jacobian, the degeneracy is reported
/// together with the nullspace directions; a stall far from any zero is a
/// plain convergence failure.
pub fn find_stationary(
    field: &SymbolicField,
    guess: &JetPoint,
    opts: &NewtonOpts,
) -> Result<JetPoint, InvmanError> {
    let mut x = guess.clone();
    let mut r = DVector::from_vec(field.eval_at(&x)?);
    let scale = 1.0 + r.norm();
    for _ in 0..opts.max_iter {
        if r.norm() <= opts.tol {
            return Ok(x);
        }
        let jac = field.jacobian(&x)?;
        let step = jac.clone().lu().solve(&(-&r));
        let step = match step {
            Some(s) if s.iter().all(|c| c.is_finite()) => s,
            _ => return Err(stall_error(field, &x, r.norm(), scale)?),
        };
        // Backtracking: halve until the residual actually decreases.
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial = x.clone();
            for (i, c) in trial.coords_mut().iter_mut().enumerate() {
                *c += lambda * step[i];
            }
            match field.eval_at(&trial) {
                Ok(v) => {
                    let rn = DVector::from_vec(v);
                    if rn.norm() < r.norm() {
                        accepted = Some((trial, rn));
                        break;
                    }
                }
                Err(_) => {} // stepped outside the domain; shorten
            }
            lambda /= 2.0;
        }
        match accepted {
            Some((trial, rn)) => {
                x = trial;
                r = rn;
            }
            None => return Err(stall_error(field, &x, r.norm(), scale)?),
        }
    }
    if r.norm() <= opts.tol {
        Ok(x)
    } else {
        Err(stall_error(field, &x, r.norm(), scale)?)
    }
}

/// Classify a stalled Newton iteration: near a zero with a rank-deficient
/// Jacobian the stationary set is degenerate; far from a zero the search
/// simply failed.
fn stall_error(
    field: &SymbolicField,
    x: &JetPoint,
    residual: f64,
    scale: f64,
) -> Result<InvmanError, InvmanError> {
    if residual <= 1e-6 * scale {
        let jac = field.jacobian(x)?;
        let thr = 1e-8 * (jac.norm() + 1.0);
        let ns = linalg::nullspace(&jac, thr);
        Ok(InvmanError::SingularJacobian {
            point: x.coords().to_vec(),
            nullspace: ns.iter().map(|v| v.as_slice().to_vec()).collect(),
            residual,
        })
    } else {
        Ok(InvmanError::NoConvergence { residual })
    }
}

// ---------------------------------------------------------------------------
// Spectral splitting.
// ---------------------------------------------------------------------------

/// Which part of the spectrum spans the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumSelector {
    /// Eigenvalues with negative real part.
    Stable,
    /// Eigenvalues with positive real part.
    Unstable,
    /// Eigenvalues with (numerically) zero real part.
    Center,
    /// The whole spectrum: the model becomes a plain Taylor normal form of
    /// the field with no graph to solve.
    All,
}

impl SpectrumSelector {
    /// Decide membership, with the zero-real-part band scaled to the
    /// spectrum's magnitude.
    pub fn accepts(self, e: Complex<f64>, scale: f64) -> bool {
        let band = 1e-8 * scale;
        match self {
            SpectrumSelector::Stable => e.re < -band,
            SpectrumSelector::Unstable => e.re > band,
            SpectrumSelector::Center => e.re.abs() <= band,
            SpectrumSelector::All => true,
        }
    }
}

/// Options for spectral splitting.
#[derive(Debug, Clone, Copy)]
pub struct SplitOpts {
    /// Minimum relative gap between the selected and complementary spectra.
    pub gap_tol: f64,
}

impl Default for SplitOpts {
    fn default() -> Self {
        SplitOpts { gap_tol: 1e-6 }
    }
}

/// An invariant splitting `J·basis = basis·blkdiag(a, b)`.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Invertible basis `[E | Ẽ]`; the selected columns `E` are orthonormal.
    pub basis: DMatrix<f64>,
    /// Dimension of the selected group (number of `E` columns).
    pub e_dim: usize,
    /// Linear block on the selected subspace.
    pub a: DMatrix<f64>,
    /// Linear block on the complementary subspace.
    pub b: DMatrix<f64>,
    pub eigs_a: Vec<Complex<f64>>,
    pub eigs_b: Vec<Complex<f64>>,
    /// Condition number of the basis.
    pub basis_condition: f64,
}

fn map_schur_err(e: LinalgError) -> InvmanError {
    match e {
        LinalgError::SelectorSplitsPair { re, im } => InvmanError::SelectorSplitsPair { re, im },
        LinalgError::SpectraOverlap => InvmanError::NearDegenerate { gap: 0.0 },
        other => InvmanError::Numeric(other),
    }
}

/// Split the spectrum of a Jacobian into the selected group and its
/// complement, with decoupled linear blocks and a deterministically
/// sign-normalized basis.
pub fn split_spectrum(
    j: &DMatrix<f64>,
    select: SpectrumSelector,
    opts: &SplitOpts,
) -> Result<SpectralSplit, InvmanError> {
    let eigs = linalg::real_eigenvalues(j).map_err(map_schur_err)?;
    let scale = 1.0 + eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let ordered = linalg::ordered_real_schur(j, |e| select.accepts(e, scale))
        .map_err(map_schur_err)?;
    let bd = linalg::block_diagonalize(&ordered).map_err(map_schur_err)?;
    let p = ordered.selected_dim;
    let n = j.nrows();
    let eigs_a = linalg::quasi_triangular_eigenvalues(&bd.a);
    let eigs_b = linalg::quasi_triangular_eigenvalues(&bd.b);
    // Gap between the groups.
    let mut gap = f64::INFINITY;
    for ea in &eigs_a {
        for eb in &eigs_b {
            gap = gap.min((ea - eb).norm());
        }
    }
    if gap < opts.gap_tol * scale {
        return Err(InvmanError::NearDegenerate { gap });
    }
    // Sign-normalize every basis column (largest-magnitude entry positive)
    // and conjugate the blocks accordingly, so downstream coefficients do
    // not depend on decomposition-internal sign choices.
    let mut basis = bd.basis;
    let mut signs = vec![1.0f64; n];
    for c in 0..n {
        let col = basis.column(c);
        let lead = col
            .iter()
            .cloned()
            .max_by(|x, y| x.abs().partial_cmp(&y.abs()).unwrap())
            .unwrap_or(1.0);
        if lead < 0.0 {
            signs[c] = -1.0;
        }
    }
    for c in 0..n {
        if signs[c] < 0.0 {
            basis.column_mut(c).neg_mut();
        }
    }
    let conj = |m: &DMatrix<f64>, offset: usize| -> DMatrix<f64> {
        let k = m.nrows();
        DMatrix::from_fn(k, k, |r, c| m[(r, c)] * signs[offset + r] * signs[offset + c])
    };
    let a = conj(&bd.a, 0);
    let b = conj(&bd.b, p);
    let svd = basis.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(SpectralSplit {
        basis,
        e_dim: p,
        a,
        b,
        eigs_a,
        eigs_b,
        basis_condition: smax / smin.max(f64::MIN_POSITIVE),
    })
}

// ---------------------------------------------------------------------------
// Tangency of eigenspaces to a constraint manifold.
// ---------------------------------------------------------------------------

/// Options for eigenspace clustering and tangency decisions.
#[derive(Debug, Clone, Copy)]
pub struct TangencyOpts {
    /// Relative radius for clustering eigenvalues.
    pub cluster_tol: f64,
    /// Relative tolerance on `‖dF·v‖` below which a direction counts as
    /// tangent to the zero set.
    pub tangent_tol: f64,
}

impl Default for TangencyOpts {
    fn default() -> Self {
        TangencyOpts {
            cluster_tol: 1e-6,
            tangent_tol: 1e-8,
        }
    }
}

/// One eigenvalue cluster of a Jacobian, its generalized eigenspace, and
/// whether that whole space is tangent to the zero set.
#[derive(Debug, Clone)]
pub struct EigenspaceInfo {
    /// Representative eigenvalue (conjugate pairs are listed once with
    /// non-negative imaginary part).
    pub eigenvalue: Complex<f64>,
    /// Total algebraic multiplicity of the cluster (a conjugate pair counts
    /// both members).
    pub algebraic: usize,
    /// Dimension of the plain eigenspace.
    pub geometric: usize,
    /// Orthonormal real basis of the generalized eigenspace.
    pub basis: Vec<DVector<f64>>,
    /// Whether every basis vector is annihilated by `dF` at the point.
    pub tangent: bool,
}

/// Cluster the spectrum of `j`, compute real generalized eigenspaces, and
/// test each against the constraint Jacobian `df` (one row per equation).
/// Defective clusters (geometric < algebraic multiplicity) are reported in
/// the result and logged.
pub fn tangency_filter(
    j: &DMatrix<f64>,
    df: &DMatrix<f64>,
    opts: &TangencyOpts,
) -> Result<Vec<EigenspaceInfo>, InvmanError> {
    let n = j.nrows();
    assert_eq!(df.ncols(), n);
    let eigs = linalg::real_eigenvalues(j).map_err(map_schur_err)?;
    let scale = 1.0 + eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let radius = opts.cluster_tol * scale;
    // Greedy clustering; conjugate pairs land in one cluster because they
    // share the representative's conjugate.
    let mut used = vec![false; eigs.len()];
    let mut out = Vec::new();
    for i in 0..eigs.len() {
        if used[i] {
            continue;
        }
        let rep = eigs[i];
        let mut members = Vec::new();
        for (k, e) in eigs.iter().enumerate() {
            if !used[k] && ((e - rep).norm() <= radius || (e - rep.conj()).norm() <= radius) {
                used[k] = true;
                members.push(*e);
            }
        }
        let algebraic = members.len();
        let rep = Complex::new(rep.re, rep.im.abs());
        let id = DMatrix::identity(n, n);
        // Real matrix whose kernel is the (generalized) eigenspace.
        let base: DMatrix<f64> = if rep.im <= radius {
            j - &id * rep.re
        } else {
            let shifted = j - &id * rep.re;
            &shifted * &shifted + &id * (rep.im * rep.im)
        };
        let kernel_of_power = |pw: usize| -> Vec<DVector<f64>> {
            let mut m = id.clone();
            for _ in 0..pw {
                m = &m * &base;
            }
            let thr = 1e-8 * (m.norm() + 1.0);
            linalg::nullspace(&m, thr)
        };
        let geometric = kernel_of_power(1).len();
        let power = if rep.im <= radius {
            algebraic
        } else {
            algebraic.div_ceil(2)
        };
        let basis = kernel_of_power(power);
        if geometric < basis.len() {
            log::warn!(
                "eigenvalue cluster at {:.4}{:+.4}i is defective (geometric {geometric} < \
                 algebraic {algebraic}); its invariant space needs generalized directions",
                rep.re,
                rep.im
            );
        }
        let df_scale = df.norm().max(f64::MIN_POSITIVE);
        let tangent = basis
            .iter()
            .all(|v| (df * v).norm() <= opts.tangent_tol * df_scale * v.norm().max(1e-300));
        out.push(EigenspaceInfo {
            eigenvalue: rep,
            algebraic,
            geometric,
            basis,
            tangent,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Taylor models of invariant manifolds.
// ---------------------------------------------------------------------------

/// A Taylor model of an invariant manifold: in adapted coordinates
/// `w = (y, z)` with `ambient = ξ + basis·w`, the manifold is the graph
/// `z = h(y)` and the flow on it is `ẏ = g(y)`.
#[derive(Debug, Clone)]
pub struct ManifoldModel {
    /// The stationary point.
    pub point: Vec<f64>,
    pub split: SpectralSplit,
    pub degree: u32,
    /// Ring over all `n` adapted coordinates; `h` and `g` only involve the
    /// leading `e_dim` of them.
    pub ring: PolyRing,
    /// Graph components, one per complementary coordinate.
    pub h: Vec<TaylorPoly>,
    /// Reduced field components, one per selected coordinate.
    pub g: Vec<TaylorPoly>,
}

impl ManifoldModel {
    /// Ambient point of the chart coordinate `y`.
    pub fn chart_point(&self, y: &[f64]) -> Vec<f64> {
        let n = self.point.len();
        let p = self.split.e_dim;
        assert_eq!(y.len(), p);
        let mut w = vec![0.0; n];
        w[..p].copy_from_slice(y);
        for (zi, hj) in w[p..].iter_mut().zip(&self.h) {
            let mut full = vec![0.0; n];
            full[..p].copy_from_slice(y);
            *zi = self.ring.eval(hj, &full);
        }
        let wv = DVector::from_vec(w);
        let amb = &self.split.basis * wv;
        (0..n).map(|i| self.point[i] + amb[i]).collect()
    }

    /// Coefficient of a graph component at a selected-variable exponent
    /// tuple (length `e_dim`).
    pub fn h_coeff(&self, component: usize, y_exponents: &[u32]) -> f64 {
        self.ring.coeff(&self.h[component], &self.full_exps(y_exponents))
    }

    /// Coefficient of the reduced field at a selected-variable exponent
    /// tuple.
    pub fn g_coeff(&self, component: usize, y_exponents: &[u32]) -> f64 {
        self.ring.coeff(&self.g[component], &self.full_exps(y_exponents))
    }

    fn full_exps(&self, y_exponents: &[u32]) -> Vec<u32> {
        assert_eq!(y_exponents.len(), self.split.e_dim);
        let mut full = vec![0u32; self.point.len()];
        full[..y_exponents.len()].copy_from_slice(y_exponents);
        full
    }
}

/// Matrix of the derivation `P ↦ ∇P·(A y)` on the span of the monomials
/// listed by ring index in `cols` (all of one degree, supported on the
/// first `p` variables). Its spectrum consists of the d-fold sums of
/// eigenvalues of `A`, which is what makes resonance detectable as spectra
/// overlap in the Sylvester solve.
fn derivation_matrix(
    ring: &PolyRing,
    a: &DMatrix<f64>,
    p: usize,
    cols: &[usize],
) -> DMatrix<f64> {
    let nd = cols.len();
    let mut deriv = DMatrix::zeros(nd, nd);
    let col_pos: std::collections::BTreeMap<usize, usize> =
        cols.iter().enumerate().map(|(kq, &ix)| (ix, kq)).collect();
    for (cq, &ix) in cols.iter().enumerate() {
        let mu = ring.monomial(ix).to_vec();
        for i in 0..p {
            if mu[i] == 0 {
                continue;
            }
            for jc in 0..p {
                let mut nu = mu.clone();
                nu[i] -= 1;
                nu[jc] += 1;
                let target = ring.monomial_index(&nu).expect("degree preserved");
                let rq = col_pos[&target];
                deriv[(rq, cq)] += mu[i] as f64 * a[(i, jc)];
            }
        }
    }
    deriv
}

/// Compute the Taylor model of the invariant manifold of `field` at the
/// stationary point `xi` for a given spectral split, up to total degree
/// `degree`.
pub fn taylor_manifold(
    field: &SymbolicField,
    xi: &JetPoint,
    split: &SpectralSplit,
    degree: u32,
) -> Result<ManifoldModel, InvmanError> {
    let n = field.spec().ambient_dim();
    let p = split.e_dim;
    let nz = n - p;
    assert!(degree >= 1);
    let ring = PolyRing::new(n, degree);
    // Adapted coordinates: ambient_i = ξ_i + Σ_j basis_ij w_j.
    let seeds: Vec<TaylorPoly> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|jc| split.basis[(i, jc)]).collect();
            ring.affine(xi.coords()[i], &row)
        })
        .collect();
    let raw: Vec<TaylorPoly> = field
        .components()
        .iter()
        .map(|c| ring.expand_expr(c, field.spec(), &seeds))
        .collect::<Result<_, _>>()?;
    let inv = split
        .basis
        .clone()
        .try_inverse()
        .ok_or(InvmanError::Numeric(LinalgError::SchurFailed))?;
    let mut f: Vec<TaylorPoly> = (0..n)
        .map(|jc| {
            let mut acc = ring.zero();
            for (i, r) in raw.iter().enumerate() {
                if inv[(jc, i)] != 0.0 {
                    acc = ring.add(&acc, &ring.scale(r, inv[(jc, i)]));
                }
            }
            acc
        })
        .collect();
    // ξ must be stationary: constant terms are rounding residue, or the
    // caller passed a non-zero of the field.
    let scale = 1.0
        + f.iter()
            .map(|c| ring.max_coeff(c))
            .fold(0.0f64, f64::max);
    let const_resid = f
        .iter()
        .map(|c| ring.coeff_at(c, 0).abs())
        .fold(0.0f64, f64::max);
    if const_resid > 1e-6 * scale {
        return Err(InvmanError::NotStationary {
            residual: const_resid,
        });
    }
    // Replace the computed linear part by the exact blocks: cross terms are
    // decomposition noise, and downstream solvability arguments lean on A
    // and B exactly.
    let mut unit = vec![0u32; n];
    for (jc, fj) in f.iter_mut().enumerate() {
        ring.set_coeff(fj, &vec![0u32; n], 0.0);
        for i in 0..n {
            unit.fill(0);
            unit[i] = 1;
            let exact = if jc < p && i < p {
                split.a[(jc, i)]
            } else if jc >= p && i >= p {
                split.b[(jc - p, i - p)]
            } else {
                0.0
            };
            ring.set_coeff(fj, &unit, exact);
        }
    }
    let f_e_nl: Vec<TaylorPoly> = f[..p].iter().map(|c| ring.truncate_below(c, 2)).collect();
    let f_z_nl: Vec<TaylorPoly> = f[p..].iter().map(|c| ring.truncate_below(c, 2)).collect();

    // Degree-indexed pieces: h_by_deg[d] and g_by_deg[d] hold the
    // homogeneous parts found at degree d.
    let mut h_total: Vec<TaylorPoly> = (0..nz).map(|_| ring.zero()).collect();
    let mut g_total: Vec<TaylorPoly> = (0..p)
        .map(|i| {
            let mut lin = ring.zero();
            for jc in 0..p {
                unit.fill(0);
                unit[jc] = 1;
                let c = split.a[(i, jc)];
                if c != 0.0 {
                    ring.set_coeff(&mut lin, &unit, c);
                }
            }
            lin
        })
        .collect();
    let mut h_by_deg: Vec<Vec<TaylorPoly>> = vec![Vec::new(); degree as usize + 1];
    let mut g_by_deg: Vec<Vec<TaylorPoly>> = vec![Vec::new(); degree as usize + 1];

    // Monomials of each degree supported on the selected variables only.
    let selected_monomials = |d: u32| -> Vec<usize> {
        ring.indices_of_degree(d)
            .filter(|&idx| ring.monomial(idx)[p..].iter().all(|&e| e == 0))
            .collect()
    };

    for d in 2..=degree {
        // Substitute the graph found so far: y ↦ y, z ↦ h_{<d}(y).
        let sub_seeds: Vec<TaylorPoly> = (0..n)
            .map(|i| {
                if i < p {
                    ring.var(i)
                } else {
                    h_total[i - p].clone()
                }
            })
            .collect();
        let g_d: Vec<TaylorPoly> = f_e_nl
            .iter()
            .map(|c| ring.homogeneous(&ring.substitute(c, &sub_seeds), d))
            .collect();
        let mut c_d: Vec<TaylorPoly> = f_z_nl
            .iter()
            .map(|c| ring.homogeneous(&ring.substitute(c, &sub_seeds), d))
            .collect();
        for e in 2..d {
            let ghom = &g_by_deg[(d + 1 - e) as usize];
            if ghom.is_empty() {
                continue;
            }
            let hhom = &h_by_deg[e as usize];
            for (j, cj) in c_d.iter_mut().enumerate() {
                for i in 0..p {
                    let dh = ring.partial(&hhom[j], i);
                    let prod = ring.mul(&dh, &ghom[i]);
                    *cj = ring.sub(cj, &prod);
                }
            }
        }
        if nz > 0 {
            let cols = selected_monomials(d);
            let nd = cols.len();
            let deriv = derivation_matrix(&ring, &split.a, p, &cols);
            let mut rhs = DMatrix::zeros(nz, nd);
            for (j, cj) in c_d.iter().enumerate() {
                for (cq, &ix) in cols.iter().enumerate() {
                    rhs[(j, cq)] = ring.coeff_at(cj, ix);
                }
            }
            // B·H − H·derivᵀ = −C, solvable exactly when no d-fold sum of
            // selected eigenvalues equals a complementary eigenvalue.
            let sol = linalg::solve_sylvester(&split.b, &deriv.transpose(), &(-rhs))
                .map_err(|e| match e {
                    LinalgError::SpectraOverlap => InvmanError::Resonance { degree: d },
                    other => InvmanError::Numeric(other),
                })?;
            let mut h_d: Vec<TaylorPoly> = (0..nz).map(|_| ring.zero()).collect();
            for (j, hj) in h_d.iter_mut().enumerate() {
                for (cq, &ix) in cols.iter().enumerate() {
                    let v = sol[(j, cq)];
                    if v != 0.0 {
                        let mono = ring.monomial(ix).to_vec();
                        ring.set_coeff(hj, &mono, v);
                    }
                }
            }
            for (tot, hd) in h_total.iter_mut().zip(&h_d) {
                *tot = ring.add(tot, hd);
            }
            h_by_deg[d as usize] = h_d;
        } else {
            h_by_deg[d as usize] = Vec::new();
        }
        for (tot, gd) in g_total.iter_mut().zip(&g_d) {
            *tot = ring.add(tot, gd);
        }
        g_by_deg[d as usize] = g_d;
    }

    Ok(ManifoldModel {
        point: xi.coords().to_vec(),
        split: split.clone(),
        degree,
        ring,
        h: h_total,
        g: g_total,
    })
}
