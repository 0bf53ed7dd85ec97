//! Numerical linear algebra underpinnings: rank decisions with an explicit
//! indeterminate band, complete nullspace bases, real Schur forms with
//! eigenvalue reordering, block diagonalization, and Sylvester solves.
//!
//! Everything here works on small dense matrices. Decompositions come from
//! `nalgebra`; the policy layers — when a rank is trustworthy, how invariant
//! subspaces are separated and swapped — live in this module.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

/// Failures of the structural decompositions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("real Schur iteration failed to converge")]
    SchurFailed,
    #[error("Sylvester equation is singular: the two spectra overlap")]
    SpectraOverlap,
    #[error("eigenvalue selector splits a complex conjugate pair {re} ± {im}i")]
    SelectorSplitsPair { re: f64, im: f64 },
}

// ---------------------------------------------------------------------------
// Singular values, rank decisions, nullspaces.
// ---------------------------------------------------------------------------

/// Outcome of a thresholded rank decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankResult {
    /// Every singular value is clearly above or clearly below the threshold.
    Definite(usize),
    /// Some singular value sits inside the guard band around the threshold;
    /// the rank cannot be trusted at this tolerance.
    Indeterminate { sigma: f64 },
}

/// Singular values (descending) and the full set of right singular vectors
/// of `a`, including the directions a thin decomposition of a wide matrix
/// would drop. Returns `(sigma, v_t)` with `sigma.len() == a.ncols()` and
/// `v_t` square of size `a.ncols()`; row `i` of `v_t` pairs with `sigma[i]`
/// (values beyond `min(nrows, ncols)` are exactly zero).
pub fn full_right_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = a.shape();
    // Padding with zero rows makes the matrix square without touching its
    // singular values, which forces the factorization to produce all `c`
    // right singular vectors.
    let work = if r >= c {
        a.clone()
    } else {
        let mut padded = DMatrix::zeros(c, c);
        padded.view_mut((0, 0), (r, c)).copy_from(a);
        padded
    };
    let svd = work.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v_sorted = DMatrix::zeros(c, c);
    for (row, &i) in order.iter().enumerate() {
        v_sorted.row_mut(row).copy_from(&v_t.row(i));
    }
    (sigma, v_sorted)
}

/// Decide the rank of a spectrum of singular values against `threshold`.
/// A value within a factor `band` of the threshold (on either side) makes
/// the decision indeterminate.
pub fn decide_rank(sigma: &[f64], threshold: f64, band: f64) -> RankResult {
    debug_assert!(band >= 1.0);
    let lo = threshold / band;
    let hi = threshold * band;
    for &s in sigma {
        if s > lo && s < hi {
            return RankResult::Indeterminate { sigma: s };
        }
    }
    RankResult::Definite(sigma.iter().filter(|&&s| s >= hi).count())
}

/// Orthonormal basis of the nullspace of `a` at the given threshold: all
/// right singular directions whose singular value is `≤ threshold`.
pub fn nullspace(a: &DMatrix<f64>, threshold: f64) -> Vec<DVector<f64>> {
    let (sigma, v_t) = full_right_svd(a);
    sigma
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect()
}

/// Minimum-norm least-squares solution of `a x = b` via the singular value
/// decomposition, with a cutoff relative to the largest singular value.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let cutoff = f64::EPSILON * smax * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, cutoff.max(f64::MIN_POSITIVE)).ok()
}

// ---------------------------------------------------------------------------
// Real Schur forms with eigenvalue ordering.
// ---------------------------------------------------------------------------

/// A real Schur decomposition `m = q t qᵀ` whose leading block group gathers
/// the eigenvalues accepted by the selector.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    /// Orthogonal similarity.
    pub q: DMatrix<f64>,
    /// Quasi-upper-triangular form with 1×1 and 2×2 diagonal blocks.
    pub t: DMatrix<f64>,
    /// Total dimension of the leading (selected) group.
    pub selected_dim: usize,
}

/// One diagonal block of a quasi-triangular matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SchurBlock {
    start: usize,
    size: usize,
}

fn coupling_threshold(t: &DMatrix<f64>) -> f64 {
    32.0 * f64::EPSILON * t.norm().max(1.0)
}

fn scan_blocks(t: &DMatrix<f64>) -> Vec<SchurBlock> {
    let n = t.nrows();
    let tiny = coupling_threshold(t);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let coupled = i + 1 < n && t[(i + 1, i)].abs() > tiny;
        let size = if coupled { 2 } else { 1 };
        blocks.push(SchurBlock { start: i, size });
        i += size;
    }
    blocks
}

fn block_eigenvalues(t: &DMatrix<f64>, b: SchurBlock) -> (Complex<f64>, Option<Complex<f64>>) {
    if b.size == 1 {
        return (Complex::new(t[(b.start, b.start)], 0.0), None);
    }
    let (i, j) = (b.start, b.start + 1);
    let tr = t[(i, i)] + t[(j, j)];
    let det = t[(i, i)] * t[(j, j)] - t[(i, j)] * t[(j, i)];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (
            Complex::new(tr / 2.0 + s, 0.0),
            Some(Complex::new(tr / 2.0 - s, 0.0)),
        )
    } else {
        let s = (-disc).sqrt();
        (
            Complex::new(tr / 2.0, s),
            Some(Complex::new(tr / 2.0, -s)),
        )
    }
}

/// Eigenvalues of a quasi-upper-triangular matrix, listed in diagonal order
/// (a 2×2 block contributes its pair consecutively).
pub fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut out = Vec::with_capacity(t.nrows());
    for b in scan_blocks(t) {
        let (e1, e2) = block_eigenvalues(t, b);
        out.push(e1);
        if let Some(e2) = e2 {
            out.push(e2);
        }
    }
    out
}

/// Eigenvalues of a general square matrix through its real Schur form.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>, LinalgError> {
    let (_, t) = real_schur(m)?;
    Ok(quasi_triangular_eigenvalues(&t))
}

/// Plain real Schur decomposition `m = q t qᵀ`.
pub fn real_schur(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>), LinalgError> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or(LinalgError::SchurFailed)?;
    Ok(schur.unpack())
}

/// Swap two adjacent diagonal blocks of `t` by an orthogonal similarity,
/// accumulating the transformation into `q`.
fn swap_adjacent(
    q: &mut DMatrix<f64>,
    t: &mut DMatrix<f64>,
    first: SchurBlock,
    second: SchurBlock,
) -> Result<(), LinalgError> {
    let n = t.nrows();
    let (p, r) = (first.size, second.size);
    let w = p + r;
    let s = first.start;
    let a = t.view((s, s), (p, p)).into_owned();
    let b = t.view((s + p, s + p), (r, r)).into_owned();
    let c = t.view((s, s + p), (p, r)).into_owned();
    // Columns [x; id] span the invariant subspace of the trailing block:
    // a·x − x·b = −c.
    let x = small_sylvester(&a, &b, &(-c))?;
    // Complete [x; id] to a basis with determinant guaranteed nonzero, then
    // orthogonalize; the leading r columns of the factor span the subspace.
    let mut basis = DMatrix::zeros(w, w);
    basis.view_mut((0, 0), (p, r)).copy_from(&x);
    basis
        .view_mut((p, 0), (r, r))
        .copy_from(&DMatrix::identity(r, r));
    basis
        .view_mut((0, r), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    let qw = basis.qr().q();
    // Similarity restricted to the window: rows across all columns, columns
    // across all rows, plus the accumulated orthogonal factor.
    let row_strip = (qw.transpose() * t.view((s, 0), (w, n))).into_owned();
    t.view_mut((s, 0), (w, n)).copy_from(&row_strip);
    let col_strip = (t.view((0, s), (n, w)) * &qw).into_owned();
    t.view_mut((0, s), (n, w)).copy_from(&col_strip);
    let q_strip = (q.view((0, s), (n, w)) * &qw).into_owned();
    q.view_mut((0, s), (n, w)).copy_from(&q_strip);
    // The exchanged layout is (r then p); flush rounding noise below the new
    // leading block.
    for i in r..w {
        for j in 0..r {
            t[(s + i, s + j)] = 0.0;
        }
    }
    Ok(())
}

/// Real Schur form of `m` with every eigenvalue accepted by `select` moved
/// to the leading diagonal positions. The selector sees one eigenvalue of a
/// conjugate pair at a time and must answer identically for both.
pub fn ordered_real_schur(
    m: &DMatrix<f64>,
    select: impl Fn(Complex<f64>) -> bool,
) -> Result<OrderedSchur, LinalgError> {
    let (mut q, mut t) = real_schur(m)?;
    let selected = |t: &DMatrix<f64>, b: SchurBlock| -> Result<bool, LinalgError> {
        let (e1, e2) = block_eigenvalues(t, b);
        let s1 = select(e1);
        if let Some(e2) = e2 {
            if select(e2) != s1 {
                return Err(LinalgError::SelectorSplitsPair {
                    re: e1.re,
                    im: e1.im.abs(),
                });
            }
        }
        Ok(s1)
    };
    let mut budget = 4 * t.nrows() * t.nrows() + 16;
    loop {
        let blocks = scan_blocks(&t);
        let flags = blocks
            .iter()
            .map(|&b| selected(&t, b))
            .collect::<Result<Vec<_>, _>>()?;
        let Some(i) = (0..blocks.len().saturating_sub(1))
            .find(|&i| !flags[i] && flags[i + 1])
        else {
            let selected_dim = blocks
                .iter()
                .zip(&flags)
                .take_while(|(_, &f)| f)
                .map(|(b, _)| b.size)
                .sum();
            return Ok(OrderedSchur {
                q,
                t,
                selected_dim,
            });
        };
        swap_adjacent(&mut q, &mut t, blocks[i], blocks[i + 1])?;
        budget -= 1;
        if budget == 0 {
            return Err(LinalgError::SchurFailed);
        }
    }
}

// ---------------------------------------------------------------------------
// Block diagonalization.
// ---------------------------------------------------------------------------

/// A similarity `m · basis = basis · blkdiag(a, b)` where the leading block
/// carries the selected spectrum of an [`OrderedSchur`].
#[derive(Debug, Clone)]
pub struct BlockDiagonalization {
    /// Invertible basis `[e | e_tilde]`; the leading `a.nrows()` columns are
    /// orthonormal.
    pub basis: DMatrix<f64>,
    /// Leading diagonal block (selected spectrum), quasi-upper-triangular.
    pub a: DMatrix<f64>,
    /// Trailing diagonal block (complementary spectrum).
    pub b: DMatrix<f64>,
}

/// Decouple the two spectral groups of an ordered Schur form. Fails with
/// [`LinalgError::SpectraOverlap`] when the groups share an eigenvalue.
pub fn block_diagonalize(schur: &OrderedSchur) -> Result<BlockDiagonalization, LinalgError> {
    let n = schur.t.nrows();
    let p = schur.selected_dim;
    let a = schur.t.view((0, 0), (p, p)).into_owned();
    let b = schur.t.view((p, p), (n - p, n - p)).into_owned();
    if p == 0 || p == n {
        return Ok(BlockDiagonalization {
            basis: schur.q.clone(),
            a,
            b,
        });
    }
    let t12 = schur.t.view((0, p), (p, n - p)).into_owned();
    // t11·z − z·t22 = −t12 makes [e | q1·z + q2] an eigen-basis pair.
    let z = solve_sylvester(&a, &b, &(-t12))?;
    let q1 = schur.q.view((0, 0), (n, p));
    let q2 = schur.q.view((0, p), (n, n - p));
    let e_tilde = q1 * z + q2;
    let mut basis = DMatrix::zeros(n, n);
    basis.view_mut((0, 0), (n, p)).copy_from(&q1.into_owned());
    basis.view_mut((0, p), (n, n - p)).copy_from(&e_tilde);
    Ok(BlockDiagonalization { basis, a, b })
}

// ---------------------------------------------------------------------------
// Sylvester equations.
// ---------------------------------------------------------------------------

/// Solve the tiny Sylvester equation `a x − x b = c` (blocks up to 2×2) by
/// Kronecker vectorization.
fn small_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let (p, r) = (a.nrows(), b.nrows());
    let id_p = DMatrix::identity(p, p);
    let id_r = DMatrix::identity(r, r);
    let m = id_r.kronecker(a) - b.transpose().kronecker(&id_p);
    let rhs = DVector::from_column_slice(c.as_slice());
    let svd = m.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let scale = smax.max(a.norm()).max(b.norm());
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(smin > 1e-12 * scale.max(1e-300)) {
        return Err(LinalgError::SpectraOverlap);
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|_| LinalgError::SpectraOverlap)?;
    Ok(DMatrix::from_column_slice(p, r, x.as_slice()))
}

/// Solve the Sylvester equation `a x − x b = c` for general square `a`
/// (p×p) and `b` (r×r) with `c` p×r, by reduction of both sides to real
/// Schur form and block back-substitution. Unique solvability requires the
/// spectra of `a` and `b` to be disjoint.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LinalgError> {
    let (p, r) = (a.nrows(), b.nrows());
    assert_eq!(c.shape(), (p, r), "right-hand side shape mismatch");
    if p == 0 || r == 0 {
        return Ok(DMatrix::zeros(p, r));
    }
    if p <= 2 && r <= 2 {
        return small_sylvester(a, b, c);
    }
    let (qa, ta) = real_schur(a)?;
    let (qb, tb) = real_schur(b)?;
    let c_t = qa.transpose() * c * &qb;
    let blocks_a = scan_blocks(&ta);
    let blocks_b = scan_blocks(&tb);
    let mut y = DMatrix::zeros(p, r);
    // ta is quasi-upper: rows couple downward sums, so iterate block rows
    // bottom-up; tb is quasi-upper: columns couple to earlier ones, so
    // iterate block columns left to right.
    for &bi in blocks_a.iter().rev() {
        for &bj in blocks_b.iter() {
            let mut rhs = c_t
                .view((bi.start, bj.start), (bi.size, bj.size))
                .into_owned();
            // Contributions of already-solved parts of y.
            let tail = bi.start + bi.size;
            if tail < p {
                rhs -= ta.view((bi.start, tail), (bi.size, p - tail))
                    * y.view((tail, bj.start), (p - tail, bj.size));
            }
            if bj.start > 0 {
                rhs += y.view((bi.start, 0), (bi.size, bj.start))
                    * tb.view((0, bj.start), (bj.start, bj.size));
            }
            let aii = ta.view((bi.start, bi.start), (bi.size, bi.size)).into_owned();
            let bjj = tb.view((bj.start, bj.start), (bj.size, bj.size)).into_owned();
            let sol = small_sylvester(&aii, &bjj, &rhs)?;
            y.view_mut((bi.start, bj.start), (bi.size, bj.size))
                .copy_from(&sol);
        }
    }
    Ok(qa * y * qb.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        random_matrix(rng, n, n).qr().q()
    }

    #[test]
    fn rank_decision_definite_and_indeterminate() {
        let sv = [3.0, 1e-3, 1e-12];
        assert_eq!(decide_rank(&sv, 3e-8, 10.0), RankResult::Definite(2));
        let sv = [1.0, 2e-8, 1e-16];
        match decide_rank(&sv, 1e-8, 10.0) {
            RankResult::Indeterminate { sigma } => assert_eq!(sigma, 2e-8),
            other => panic!("expected indeterminate, got {other:?}"),
        }
        assert_eq!(decide_rank(&[0.0, 0.0], 1e-8, 10.0), RankResult::Definite(0));
    }

    #[test]
    fn nullspace_of_wide_matrix_is_complete() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ns = nullspace(&a, 1e-12);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!((a.clone() * v).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(ns[0].dot(&ns[1]).abs() < 1e-12);
    }

    #[test]
    fn nullspace_dimension_matches_rank_deficit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k = rng.random_range(1..4usize);
            let n = rng.random_range(k..6usize) + 1;
            let a = random_matrix(&mut rng, k, n);
            let (sigma, _) = full_right_svd(&a);
            let rank = sigma.iter().filter(|&&s| s > 1e-10).count();
            let ns = nullspace(&a, 1e-10);
            assert_eq!(ns.len(), n - rank);
            for v in &ns {
                assert!((a.clone() * v).norm() < 1e-9, "null vector not annihilated");
            }
        }
    }

    #[test]
    fn least_squares_recovers_consistent_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 3);
        let x_true = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let b = &a * &x_true;
        let x = least_squares(&a, &b).unwrap();
        assert!((x - x_true).norm() < 1e-10);
    }

    #[test]
    fn sylvester_random_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let p = rng.random_range(1..5usize);
            let r = rng.random_range(1..5usize);
            let a = random_matrix(&mut rng, p, p) + DMatrix::identity(p, p) * 5.0;
            let b = random_matrix(&mut rng, r, r) - DMatrix::identity(r, r) * 5.0;
            let x_true = random_matrix(&mut rng, p, r);
            let c = &a * &x_true - &x_true * &b;
            let x = solve_sylvester(&a, &b, &c).unwrap();
            assert!(
                (&x - &x_true).norm() < 1e-9,
                "residual {}",
                (&x - &x_true).norm()
            );
        }
    }

    #[test]
    fn sylvester_complex_spectra() {
        // Spectra 3 ± i and −3 ± 2i: disjoint, both complex.
        let a = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, 1.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[-3.0, 2.0, -2.0, -3.0]);
        let x_true = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.75]);
        let c = &a * &x_true - &x_true * &b;
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!((x - x_true).norm() < 1e-11);
    }

    #[test]
    fn sylvester_detects_spectrum_overlap() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let c = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert_eq!(
            solve_sylvester(&a, &b, &c).unwrap_err(),
            LinalgError::SpectraOverlap
        );
        // Larger case sharing one eigenvalue.
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 7.0]);
        let c = DMatrix::identity(3, 3);
        assert_eq!(
            solve_sylvester(&a, &b, &c).unwrap_err(),
            LinalgError::SpectraOverlap
        );
    }

    #[test]
    fn ordered_schur_groups_negative_real_parts_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 1.0, -0.5, 3.0]));
        let q0 = random_orthogonal(&mut rng, 4);
        let m = &q0 * d * q0.transpose();
        let os = ordered_real_schur(&m, |e| e.re < 0.0).unwrap();
        assert_eq!(os.selected_dim, 2);
        // Orthogonality and reconstruction.
        assert!((os.q.transpose() * &os.q - DMatrix::identity(4, 4)).norm() < 1e-12);
        assert!((&os.q * &os.t * os.q.transpose() - &m).norm() < 1e-10);
        // Leading group spectrum {−2, −0.5}, trailing {1, 3}.
        let eigs = quasi_triangular_eigenvalues(&os.t);
        let mut lead: Vec<f64> = eigs[..2].iter().map(|e| e.re).collect();
        lead.sort_by(f64::total_cmp);
        assert!((lead[0] + 2.0).abs() < 1e-10 && (lead[1] + 0.5).abs() < 1e-10);
        let mut tail: Vec<f64> = eigs[2..].iter().map(|e| e.re).collect();
        tail.sort_by(f64::total_cmp);
        assert!((tail[0] - 1.0).abs() < 1e-10 && (tail[1] - 3.0).abs() < 1e-10);
        // Strict block-triangular structure below the leading group.
        assert!(os.t.view((2, 0), (2, 2)).norm() < 1e-12);
    }

    #[test]
    fn ordered_schur_moves_complex_pair_as_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 1.0;
        m[(0, 1)] = 5.0;
        m[(1, 0)] = -5.0;
        m[(1, 1)] = 1.0;
        m[(2, 2)] = -2.0;
        let q0 = random_orthogonal(&mut rng, 3);
        let m = &q0 * m * q0.transpose();
        let os = ordered_real_schur(&m, |e| e.re < 0.0).unwrap();
        assert_eq!(os.selected_dim, 1);
        assert!((os.t[(0, 0)] + 2.0).abs() < 1e-10);
        let eigs = quasi_triangular_eigenvalues(&os.t);
        assert!((eigs[1].im.abs() - 5.0).abs() < 1e-9);
        assert!((&os.q * &os.t * os.q.transpose() - &m).norm() < 1e-10);
    }

    #[test]
    fn selector_must_not_split_conjugate_pairs() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let err = ordered_real_schur(&m, |e| e.im > 0.0).unwrap_err();
        assert!(matches!(err, LinalgError::SelectorSplitsPair { .. }));
    }

    #[test]
    fn select_everything_keeps_whole_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(&mut rng, 4, 4);
        let os = ordered_real_schur(&m, |_| true).unwrap();
        assert_eq!(os.selected_dim, 4);
        let bd = block_diagonalize(&os).unwrap();
        assert_eq!(bd.a.nrows(), 4);
        assert_eq!(bd.b.nrows(), 0);
        assert!((&m * &bd.basis - &bd.basis * &bd.a).norm() < 1e-10);
    }

    #[test]
    fn block_diagonalize_decouples_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // Eigenvalues −1 ± 2i (selected) and 1.5, 4 (rejected).
        let mut core = DMatrix::zeros(4, 4);
        core[(0, 0)] = -1.0;
        core[(0, 1)] = 2.0;
        core[(1, 0)] = -2.0;
        core[(1, 1)] = -1.0;
        core[(2, 2)] = 1.5;
        core[(2, 3)] = 0.7;
        core[(3, 3)] = 4.0;
        let s = random_matrix(&mut rng, 4, 4) * 0.3 + DMatrix::identity(4, 4);
        let m = &s * core * s.try_inverse().unwrap();
        let os = ordered_real_schur(&m, |e| e.re < 0.0).unwrap();
        assert_eq!(os.selected_dim, 2);
        let bd = block_diagonalize(&os).unwrap();
        let p = 2;
        let e = bd.basis.view((0, 0), (4, p)).into_owned();
        let et = bd.basis.view((0, p), (4, 2)).into_owned();
        // Leading columns orthonormal.
        assert!((e.transpose() * &e - DMatrix::identity(p, p)).norm() < 1e-11);
        // m · basis = basis · blkdiag(a, b).
        assert!((&m * &e - &e * &bd.a).norm() < 1e-9);
        assert!((&m * &et - &et * &bd.b).norm() < 1e-9);
        // The blocks carry the right spectra.
        let ea = quasi_triangular_eigenvalues(&bd.a);
        assert!(ea.iter().all(|z| (z.re + 1.0).abs() < 1e-9 && (z.im.abs() - 2.0).abs() < 1e-9));
        let eb = real_eigenvalues(&bd.b).unwrap();
        let mut re: Vec<f64> = eb.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] - 1.5).abs() < 1e-9 && (re[1] - 4.0).abs() < 1e-9);
    }
}
