//! Truncated multivariate Taylor arithmetic.
//!
//! A [`PolyRing`] fixes a number of variables and a maximum total degree;
//! [`TaylorPoly`] values are dense coefficient vectors over the graded
//! monomial basis of that ring. Products truncate above the maximum degree,
//! and analytic functions (`sin`, `exp`, `ln`, …) act through their
//! univariate series at the constant term, so a whole expression tree can be
//! expanded around a point in one pass.

use crate::expr::{BinOp, EvalError, Exponent, Expr, UnaryFn};
use crate::jet::JetSpec;
use std::collections::BTreeMap;
use std::ops::Range;
use thiserror::Error;

/// Failures of Taylor expansion.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{what} is not analytic at expansion point {at}")]
    NotAnalytic { what: &'static str, at: f64 },
}

/// A fixed arena of monomials: all exponent tuples of `nvars` variables
/// with total degree at most `maxdeg`, ordered by degree then
/// lexicographically.
#[derive(Debug, Clone)]
pub struct PolyRing {
    nvars: usize,
    maxdeg: u32,
    monos: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u32>, usize>,
    deg_start: Vec<usize>,
}

/// A polynomial of the ring: dense coefficients over its monomial basis.
/// All operations go through [`PolyRing`] methods so the basis stays
/// consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPoly {
    coeffs: Vec<f64>,
}

fn gen_monomials(nvars: usize, deg: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == nvars - 1 {
        prefix.push(deg);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=deg).rev() {
        prefix.push(e);
        gen_monomials(nvars, deg - e, prefix, out);
        prefix.pop();
    }
}

impl PolyRing {
    pub fn new(nvars: usize, maxdeg: u32) -> PolyRing {
        assert!(nvars >= 1);
        let mut monos = Vec::new();
        let mut deg_start = Vec::with_capacity(maxdeg as usize + 2);
        for d in 0..=maxdeg {
            deg_start.push(monos.len());
            gen_monomials(nvars, d, &mut Vec::new(), &mut monos);
        }
        deg_start.push(monos.len());
        let index = monos
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        PolyRing {
            nvars,
            maxdeg,
            monos,
            index,
            deg_start,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn maxdeg(&self) -> u32 {
        self.maxdeg
    }

    /// Number of basis monomials.
    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn monomial(&self, idx: usize) -> &[u32] {
        &self.monos[idx]
    }

    pub fn monomial_index(&self, exponents: &[u32]) -> Option<usize> {
        self.index.get(exponents).copied()
    }

    /// Basis positions of all monomials of one total degree.
    pub fn indices_of_degree(&self, d: u32) -> Range<usize> {
        let d = d as usize;
        self.deg_start[d]..self.deg_start[d + 1]
    }

    pub fn zero(&self) -> TaylorPoly {
        TaylorPoly {
            coeffs: vec![0.0; self.len()],
        }
    }

    pub fn constant(&self, c: f64) -> TaylorPoly {
        let mut p = self.zero();
        p.coeffs[0] = c;
        p
    }

    pub fn var(&self, i: usize) -> TaylorPoly {
        assert!(i < self.nvars);
        let mut e = vec![0u32; self.nvars];
        e[i] = 1;
        let mut p = self.zero();
        p.coeffs[self.index[&e]] = 1.0;
        p
    }

    /// `c + Σ lin_i · x_i`.
    pub fn affine(&self, c: f64, lin: &[f64]) -> TaylorPoly {
        assert_eq!(lin.len(), self.nvars);
        let mut p = self.constant(c);
        for (i, &l) in lin.iter().enumerate() {
            let mut e = vec![0u32; self.nvars];
            e[i] = 1;
            p.coeffs[self.index[&e]] = l;
        }
        p
    }

    pub fn coeff(&self, p: &TaylorPoly, exponents: &[u32]) -> f64 {
        self.monomial_index(exponents)
            .map(|i| p.coeffs[i])
            .unwrap_or(0.0)
    }

    pub fn coeff_at(&self, p: &TaylorPoly, idx: usize) -> f64 {
        p.coeffs[idx]
    }

    pub fn set_coeff(&self, p: &mut TaylorPoly, exponents: &[u32], value: f64) {
        let i = self
            .monomial_index(exponents)
            .expect("exponent tuple outside the ring");
        p.coeffs[i] = value;
    }

    pub fn add(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        TaylorPoly {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn sub(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        TaylorPoly {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
        }
    }

    pub fn scale(&self, a: &TaylorPoly, s: f64) -> TaylorPoly {
        TaylorPoly {
            coeffs: a.coeffs.iter().map(|x| x * s).collect(),
        }
    }

    pub fn neg(&self, a: &TaylorPoly) -> TaylorPoly {
        self.scale(a, -1.0)
    }

    pub fn mul(&self, a: &TaylorPoly, b: &TaylorPoly) -> TaylorPoly {
        let mut out = self.zero();
        let mut sum = vec![0u32; self.nvars];
        for (ia, &ca) in a.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            let ma = &self.monos[ia];
            let da: u32 = ma.iter().sum();
            for (ib, &cb) in b.coeffs.iter().enumerate() {
                if cb == 0.0 {
                    continue;
                }
                let mb = &self.monos[ib];
                let db: u32 = mb.iter().sum();
                if da + db > self.maxdeg {
                    continue;
                }
                for i in 0..self.nvars {
                    sum[i] = ma[i] + mb[i];
                }
                let idx = self.index[&sum];
                out.coeffs[idx] += ca * cb;
            }
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self, p: &TaylorPoly) -> f64 {
        p.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self, p: &TaylorPoly, tol: f64) -> bool {
        self.max_coeff(p) <= tol
    }

    /// Plain numeric evaluation at a coordinate tuple.
    pub fn eval(&self, p: &TaylorPoly, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars);
        let mut acc = 0.0;
        for (i, &c) in p.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut term = c;
            for (v, &e) in self.monos[i].iter().enumerate() {
                term *= x[v].powi(e as i32);
            }
            acc += term;
        }
        acc
    }

    /// Partial derivative with respect to variable `i`.
    pub fn partial(&self, p: &TaylorPoly, i: usize) -> TaylorPoly {
        assert!(i < self.nvars);
        let mut out = self.zero();
        let mut lowered = vec![0u32; self.nvars];
        for (idx, &c) in p.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let m = &self.monos[idx];
            if m[i] == 0 {
                continue;
            }
            lowered.copy_from_slice(m);
            lowered[i] -= 1;
            out.coeffs[self.index[&lowered]] += c * m[i] as f64;
        }
        out
    }

    /// The homogeneous part of one total degree.
    pub fn homogeneous(&self, p: &TaylorPoly, d: u32) -> TaylorPoly {
        let mut out = self.zero();
        if d <= self.maxdeg {
            let r = self.indices_of_degree(d);
            out.coeffs[r.clone()].copy_from_slice(&p.coeffs[r]);
        }
        out
    }

    /// Drop terms of total degree below `dmin`.
    pub fn truncate_below(&self, p: &TaylorPoly, dmin: u32) -> TaylorPoly {
        let mut out = p.clone();
        let cut = self.deg_start[(dmin as usize).min(self.deg_start.len() - 1)];
        out.coeffs[..cut].fill(0.0);
        out
    }

    /// Total degree of the highest non-zero term (0 for the zero polynomial).
    pub fn degree(&self, p: &TaylorPoly) -> u32 {
        for d in (0..=self.maxdeg).rev() {
            if p.coeffs[self.indices_of_degree(d)]
                .iter()
                .any(|&c| c != 0.0)
            {
                return d;
            }
        }
        0
    }

    /// Substitute `seeds[i]` for variable `i`: full composition, truncated
    /// to the ring degree.
    pub fn substitute(&self, p: &TaylorPoly, seeds: &[TaylorPoly]) -> TaylorPoly {
        assert_eq!(seeds.len(), self.nvars);
        // Precompute powers of every seed up to the maximum exponent it is
        // raised to.
        let mut max_exp = vec![0u32; self.nvars];
        for (idx, &c) in p.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (v, &e) in self.monos[idx].iter().enumerate() {
                max_exp[v] = max_exp[v].max(e);
            }
        }
        let powers: Vec<Vec<TaylorPoly>> = (0..self.nvars)
            .map(|v| {
                let mut pw = Vec::with_capacity(max_exp[v] as usize + 1);
                pw.push(self.constant(1.0));
                for e in 1..=max_exp[v] {
                    let prev = &pw[e as usize - 1];
                    pw.push(self.mul(prev, &seeds[v]));
                }
                pw
            })
            .collect();
        let mut out = self.zero();
        for (idx, &c) in p.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut term = self.constant(c);
            for (v, &e) in self.monos[idx].iter().enumerate() {
                if e > 0 {
                    term = self.mul(&term, &powers[v][e as usize]);
                }
            }
            out = self.add(&out, &term);
        }
        out
    }

    /// Compose a univariate power series `Σ s_k w^k` with a polynomial whose
    /// constant term is zero, by Horner evaluation.
    fn series(&self, s: &[f64], w: &TaylorPoly) -> TaylorPoly {
        debug_assert!(w.coeffs[0] == 0.0);
        let mut acc = self.constant(*s.last().unwrap());
        for &c in s.iter().rev().skip(1) {
            acc = self.mul(&acc, w);
            acc.coeffs[0] += c;
        }
        acc
    }

    fn factorials(&self) -> Vec<f64> {
        let mut f = vec![1.0f64];
        for k in 1..=self.maxdeg as usize {
            f.push(f[k - 1] * k as f64);
        }
        f
    }

    fn apply_unary(&self, f: UnaryFn, a: &TaylorPoly) -> Result<TaylorPoly, PolyError> {
        if f == UnaryFn::Neg {
            return Ok(self.neg(a));
        }
        let c = a.coeffs[0];
        let mut w = a.clone();
        w.coeffs[0] = 0.0;
        let d = self.maxdeg as usize;
        let fact = self.factorials();
        let s: Vec<f64> = match f {
            UnaryFn::Neg => unreachable!(),
            UnaryFn::Exp => {
                let ec = c.exp();
                if !ec.is_finite() {
                    return Err(EvalError::NonFinite.into());
                }
                (0..=d).map(|k| ec / fact[k]).collect()
            }
            UnaryFn::Sin => {
                let (sc, cc) = (c.sin(), c.cos());
                (0..=d)
                    .map(|k| {
                        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                        let base = if k % 2 == 0 { sc } else { cc };
                        sign * base / fact[k]
                    })
                    .collect()
            }
            UnaryFn::Cos => {
                let (sc, cc) = (c.sin(), c.cos());
                (0..=d)
                    .map(|k| {
                        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                        let base = if k % 2 == 0 { cc } else { -sc };
                        sign * base / fact[k]
                    })
                    .collect()
            }
            UnaryFn::Ln => {
                if c <= 0.0 {
                    return Err(EvalError::LogNonPositive(c).into());
                }
                let mut s = vec![c.ln()];
                for k in 1..=d {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    s.push(sign / (k as f64 * c.powi(k as i32)));
                }
                s
            }
            UnaryFn::Sqrt => {
                if c < 0.0 {
                    return Err(EvalError::SqrtNegative(c).into());
                }
                if c == 0.0 {
                    if self.is_zero(&w, 0.0) {
                        return Ok(self.constant(0.0));
                    }
                    return Err(PolyError::NotAnalytic {
                        what: "square root",
                        at: 0.0,
                    });
                }
                binomial_series(0.5, c, d)
            }
        };
        Ok(self.series(&s, &w))
    }

    fn apply_pow(&self, a: &TaylorPoly, e: Exponent) -> Result<TaylorPoly, PolyError> {
        let c = a.coeffs[0];
        match e {
            Exponent::Int(n) if n >= 0 => {
                let mut acc = self.constant(1.0);
                let mut base = a.clone();
                let mut k = n as u64;
                while k > 0 {
                    if k & 1 == 1 {
                        acc = self.mul(&acc, &base);
                    }
                    k >>= 1;
                    if k > 0 {
                        base = self.mul(&base, &base);
                    }
                }
                Ok(acc)
            }
            Exponent::Int(n) => {
                if c == 0.0 {
                    return Err(EvalError::ZeroToNegative(n as f64).into());
                }
                let pos = self.apply_pow(a, Exponent::Int(-n))?;
                self.invert(&pos)
            }
            Exponent::Real(r) => {
                if c == 0.0 {
                    if r < 0.0 {
                        return Err(EvalError::ZeroToNegative(r).into());
                    }
                    let mut w = a.clone();
                    w.coeffs[0] = 0.0;
                    if self.is_zero(&w, 0.0) {
                        return Ok(self.constant(0.0));
                    }
                    return Err(PolyError::NotAnalytic {
                        what: "fractional power",
                        at: 0.0,
                    });
                }
                if c < 0.0 {
                    return Err(EvalError::NegativeBase {
                        base: c,
                        exponent: r,
                    }
                    .into());
                }
                let s = binomial_series(r, c, self.maxdeg as usize);
                let mut w = a.clone();
                w.coeffs[0] = 0.0;
                Ok(self.series(&s, &w))
            }
        }
    }

    /// Multiplicative inverse; requires a non-zero constant term.
    pub fn invert(&self, a: &TaylorPoly) -> Result<TaylorPoly, PolyError> {
        let c = a.coeffs[0];
        if c == 0.0 {
            return Err(EvalError::DivisionByZero.into());
        }
        let mut w = a.clone();
        w.coeffs[0] = 0.0;
        let s: Vec<f64> = (0..=self.maxdeg as usize)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / c.powi(k as i32 + 1)
            })
            .collect();
        Ok(self.series(&s, &w))
    }

    /// Expand an expression in Taylor arithmetic. `seeds[i]` is the
    /// polynomial standing for the flat coordinate `i` of `spec`.
    pub fn expand_expr(
        &self,
        e: &Expr,
        spec: JetSpec,
        seeds: &[TaylorPoly],
    ) -> Result<TaylorPoly, PolyError> {
        assert_eq!(seeds.len(), spec.ambient_dim());
        Ok(match e {
            Expr::Const(c) => self.constant(*c),
            Expr::Var(v) => {
                if !spec.contains(*v) {
                    return Err(EvalError::VarOutOfRange(v.to_string()).into());
                }
                match v {
                    crate::jet::JetVar::T => seeds[0].clone(),
                    crate::jet::JetVar::U { alpha, order } => {
                        seeds[spec.index(*alpha, *order)].clone()
                    }
                }
            }
            Expr::Unary(f, a) => {
                let inner = self.expand_expr(a, spec, seeds)?;
                self.apply_unary(*f, &inner)?
            }
            Expr::Bin(op, a, b) => {
                let x = self.expand_expr(a, spec, seeds)?;
                let y = self.expand_expr(b, spec, seeds)?;
                match op {
                    BinOp::Add => self.add(&x, &y),
                    BinOp::Sub => self.sub(&x, &y),
                    BinOp::Mul => self.mul(&x, &y),
                    BinOp::Div => self.mul(&x, &self.invert(&y)?),
                }
            }
            Expr::Pow(a, ex) => {
                let x = self.expand_expr(a, spec, seeds)?;
                self.apply_pow(&x, *ex)?
            }
        })
    }
}

/// Series of `(c + w)^r` around `w = 0`: coefficients `binom(r, k)·c^{r−k}`.
fn binomial_series(r: f64, c: f64, maxdeg: usize) -> Vec<f64> {
    let mut s = Vec::with_capacity(maxdeg + 1);
    let mut binom = 1.0f64;
    for k in 0..=maxdeg {
        if k > 0 {
            binom *= (r - (k as f64 - 1.0)) / k as f64;
        }
        s.push(binom * c.powf(r - k as f64));
    }
    s
}
