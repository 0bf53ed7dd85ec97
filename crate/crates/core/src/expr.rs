//! Symbolic expressions over jet variables.
//!
//! Expressions are closed under `+ - * /`, powers with constant exponents, and
//! the analytic functions `sin`, `cos`, `exp`, `ln`, `sqrt`, `neg`. Variables
//! are the independent variable `t` and derivative coordinates `u<α>_<k>`
//! (with `u<α>` accepted as an alias for `u<α>_0`). Differentiation is exact
//! and applies light simplification — constant folding and neutral-element
//! absorption — nothing clever.
//!
//! Input grammar (whitespace-insensitive):
//!
//! ```text
//! expr     := term (('+'|'-') term)*
//! term     := factor (('*'|'/') factor)*
//! factor   := '-'? base ('^' exponent)?
//! base     := number | ident | '(' expr ')' | func '(' expr ')'
//! func     := 'sin' | 'cos' | 'exp' | 'ln' | 'sqrt' | 'neg'
//! exponent := '-'? number
//! ```
//!
//! The leading `-` on a factor is input sugar for `neg(...)`; printed output
//! always uses the function form, so print → parse is the identity on parsed
//! trees. A single `=` may appear in equation text: `lhs = rhs` is rewritten
//! to `lhs - rhs` before parsing.

use crate::jet::{JetPoint, JetSpec, JetVar};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Analytic unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Neg,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Neg => "neg",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Exp => "exp",
            UnaryFn::Ln => "ln",
            UnaryFn::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "neg" => UnaryFn::Neg,
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "exp" => UnaryFn::Exp,
            "ln" => UnaryFn::Ln,
            "sqrt" => UnaryFn::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64, EvalError> {
        match self {
            UnaryFn::Neg => Ok(-x),
            UnaryFn::Sin => Ok(x.sin()),
            UnaryFn::Cos => Ok(x.cos()),
            UnaryFn::Exp => Ok(x.exp()),
            UnaryFn::Ln => {
                if x <= 0.0 {
                    Err(EvalError::LogNonPositive(x))
                } else {
                    Ok(x.ln())
                }
            }
            UnaryFn::Sqrt => {
                if x < 0.0 {
                    Err(EvalError::SqrtNegative(x))
                } else {
                    Ok(x.sqrt())
                }
            }
        }
    }
}

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Constant exponent of a power. Integer exponents are kept exact so that
/// negative bases stay meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Int(i64),
    Real(f64),
}

impl Exponent {
    fn as_f64(self) -> f64 {
        match self {
            Exponent::Int(n) => n as f64,
            Exponent::Real(r) => r,
        }
    }
}

/// A symbolic expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(JetVar),
    Unary(UnaryFn, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Exponent),
}

/// Runtime evaluation failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of non-positive value {0}")]
    LogNonPositive(f64),
    #[error("square root of negative value {0}")]
    SqrtNegative(f64),
    #[error("zero base with negative exponent {0}")]
    ZeroToNegative(f64),
    #[error("negative base {base} with non-integer exponent {exponent}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("evaluation produced a non-finite value")]
    NonFinite,
    #[error("variable {0} is not a coordinate of the evaluation point")]
    VarOutOfRange(String),
}

/// Parsing, validation, and file-format failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("undeclared variable `{name}` at byte {pos}")]
    UndeclaredVariable { name: String, pos: usize },
    #[error("variable `{name}` at byte {pos} is outside the signature (m={m}, q={q})")]
    OutOfSignature { name: String, pos: usize, m: u32, q: u32 },
    #[error("more than one `=` in equation text (second at byte {pos})")]
    MultipleEquals { pos: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid equation file: {0}")]
    File(String),
    #[error("invalid equation system: {0}")]
    Validation(String),
}

// ---------------------------------------------------------------------------
// Construction helpers with light simplification.
// ---------------------------------------------------------------------------

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: JetVar) -> Expr {
        Expr::Var(v)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 1.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if (x + y).is_finite() => Expr::Const(x + y),
            _ if a.is_zero() => b,
            _ if b.is_zero() => a,
            _ => Expr::Bin(BinOp::Add, Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if (x - y).is_finite() => Expr::Const(x - y),
            _ if b.is_zero() => a,
            _ if a.is_zero() => Expr::neg(b),
            _ => Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if (x * y).is_finite() => Expr::Const(x * y),
            _ if a.is_zero() || b.is_zero() => Expr::Const(0.0),
            _ if a.is_one() => b,
            _ if b.is_one() => a,
            _ => Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Const(x), Expr::Const(y)) if *y != 0.0 && (x / y).is_finite() => {
                Expr::Const(x / y)
            }
            _ if b.is_one() => a,
            _ => Expr::Bin(BinOp::Div, Box::new(a), Box::new(b)),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Unary(UnaryFn::Neg, inner) => *inner,
            _ => Expr::Unary(UnaryFn::Neg, Box::new(a)),
        }
    }

    pub fn unary(f: UnaryFn, a: Expr) -> Expr {
        if f == UnaryFn::Neg {
            return Expr::neg(a);
        }
        if let Expr::Const(c) = a {
            if let Ok(v) = f.apply(c) {
                if v.is_finite() {
                    return Expr::Const(v);
                }
            }
        }
        Expr::Unary(f, Box::new(a))
    }

    pub fn pow(a: Expr, e: Exponent) -> Expr {
        match e {
            Exponent::Int(0) => Expr::Const(1.0),
            Exponent::Int(1) => a,
            _ => {
                if let Expr::Const(c) = a {
                    if let Ok(v) = pow_eval(c, e) {
                        if v.is_finite() {
                            return Expr::Const(v);
                        }
                    }
                }
                Expr::Pow(Box::new(a), e)
            }
        }
    }

    pub fn powi(a: Expr, n: i64) -> Expr {
        Expr::pow(a, Exponent::Int(n))
    }
}

fn pow_eval(base: f64, e: Exponent) -> Result<f64, EvalError> {
    match e {
        Exponent::Int(n) => {
            if base == 0.0 && n < 0 {
                return Err(EvalError::ZeroToNegative(n as f64));
            }
            Ok(base.powi(n.clamp(i32::MIN as i64, i32::MAX as i64) as i32))
        }
        Exponent::Real(r) => {
            if base == 0.0 && r < 0.0 {
                return Err(EvalError::ZeroToNegative(r));
            }
            if base < 0.0 {
                return Err(EvalError::NegativeBase {
                    base,
                    exponent: r,
                });
            }
            Ok(base.powf(r))
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation and differentiation.
// ---------------------------------------------------------------------------

impl Expr {
    /// Evaluate at a jet point. Domain violations and non-finite intermediate
    /// results are reported, never folded into NaN.
    pub fn eval(&self, p: &JetPoint) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(v) => p
                .var(*v)
                .ok_or_else(|| EvalError::VarOutOfRange(v.to_string()))?,
            Expr::Unary(f, a) => f.apply(a.eval(p)?)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(p)?;
                let y = b.eval(p)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        x / y
                    }
                }
            }
            Expr::Pow(a, e) => pow_eval(a.eval(p)?, *e)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Exact partial derivative with respect to one jet variable.
    pub fn diff(&self, v: JetVar) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
            Expr::Unary(f, a) => {
                let da = a.diff(v);
                match f {
                    UnaryFn::Neg => Expr::neg(da),
                    UnaryFn::Sin => Expr::mul(Expr::unary(UnaryFn::Cos, (**a).clone()), da),
                    UnaryFn::Cos => {
                        Expr::neg(Expr::mul(Expr::unary(UnaryFn::Sin, (**a).clone()), da))
                    }
                    UnaryFn::Exp => Expr::mul(Expr::unary(UnaryFn::Exp, (**a).clone()), da),
                    UnaryFn::Ln => Expr::div(da, (**a).clone()),
                    UnaryFn::Sqrt => Expr::div(
                        da,
                        Expr::mul(Expr::Const(2.0), Expr::unary(UnaryFn::Sqrt, (**a).clone())),
                    ),
                }
            }
            Expr::Bin(op, a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                match op {
                    BinOp::Add => Expr::add(da, db),
                    BinOp::Sub => Expr::sub(da, db),
                    BinOp::Mul => Expr::add(
                        Expr::mul(da, (**b).clone()),
                        Expr::mul((**a).clone(), db),
                    ),
                    BinOp::Div => Expr::div(
                        Expr::sub(
                            Expr::mul(da, (**b).clone()),
                            Expr::mul((**a).clone(), db),
                        ),
                        Expr::powi((**b).clone(), 2),
                    ),
                }
            }
            Expr::Pow(a, e) => {
                let da = a.diff(v);
                let lowered = match e {
                    Exponent::Int(n) => Exponent::Int(n - 1),
                    Exponent::Real(r) => Exponent::Real(r - 1.0),
                };
                Expr::mul(
                    Expr::mul(Expr::Const(e.as_f64()), Expr::pow((**a).clone(), lowered)),
                    da,
                )
            }
        }
    }

    /// Highest derivative order referenced, if any derivative coordinate
    /// occurs at all.
    pub fn max_order(&self) -> Option<u32> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(JetVar::T) => None,
            Expr::Var(JetVar::U { order, .. }) => Some(*order),
            Expr::Unary(_, a) => a.max_order(),
            Expr::Bin(_, a, b) => match (a.max_order(), b.max_order()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Pow(a, _) => a.max_order(),
        }
    }

    /// All distinct variables referenced, in flat coordinate order relative
    /// to `spec`.
    pub fn variables(&self, spec: JetSpec) -> Vec<JetVar> {
        let mut present = vec![false; spec.ambient_dim()];
        self.collect_vars(spec, &mut present);
        (0..spec.ambient_dim())
            .filter(|&i| present[i])
            .map(|i| spec.var_at(i))
            .collect()
    }

    fn collect_vars(&self, spec: JetSpec, present: &mut [bool]) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(JetVar::T) => present[0] = true,
            Expr::Var(v @ JetVar::U { alpha, order }) => {
                if spec.contains(*v) {
                    present[spec.index(*alpha, *order)] = true;
                }
            }
            Expr::Unary(_, a) => a.collect_vars(spec, present),
            Expr::Bin(_, a, b) => {
                a.collect_vars(spec, present);
                b.collect_vars(spec, present);
            }
            Expr::Pow(a, _) => a.collect_vars(spec, present),
        }
    }

    /// Substitute every occurrence of `var` by an expression.
    pub fn substitute(&self, var: JetVar, replacement: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(w) => {
                if *w == var {
                    replacement.clone()
                } else {
                    Expr::Var(*w)
                }
            }
            Expr::Unary(f, a) => Expr::unary(*f, a.substitute(var, replacement)),
            Expr::Bin(op, a, b) => {
                let x = a.substitute(var, replacement);
                let y = b.substitute(var, replacement);
                match op {
                    BinOp::Add => Expr::add(x, y),
                    BinOp::Sub => Expr::sub(x, y),
                    BinOp::Mul => Expr::mul(x, y),
                    BinOp::Div => Expr::div(x, y),
                }
            }
            Expr::Pow(a, e) => Expr::pow(a.substitute(var, replacement), *e),
        }
    }
}

// ---------------------------------------------------------------------------
// Printing. Output always re-parses to the same tree.
// ---------------------------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Expr {
    /// Precedence levels: 1 additive, 2 multiplicative, 3 power, 4 atom.
    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Pow(..) => 3,
            Expr::Const(c) if *c < 0.0 => 1,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        let me = self.prec();
        let parens = me < parent;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(c) => write!(f, "{c}")?,
            Expr::Var(v) => write!(f, "{v}")?,
            Expr::Unary(func, a) => write!(f, "{}({a})", func.name())?,
            Expr::Bin(op, a, b) => {
                // Left-associative operators: the right operand needs strictly
                // higher precedence to survive a round trip.
                let (sym, right_min) = match op {
                    BinOp::Add => ("+", 2),
                    BinOp::Sub => ("-", 2),
                    BinOp::Mul => ("*", 3),
                    BinOp::Div => ("/", 3),
                };
                a.fmt_prec(f, me)?;
                write!(f, " {sym} ")?;
                b.fmt_prec(f, right_min)?;
            }
            Expr::Pow(a, e) => {
                // A power base must be an atom in the grammar.
                a.fmt_prec(f, 4)?;
                match e {
                    Exponent::Int(n) => write!(f, "^{n}")?,
                    Exponent::Real(r) => {
                        if r.fract() == 0.0 && r.abs() < 1e15 {
                            write!(f, "^{r:.1}")?;
                        } else {
                            write!(f, "^{r}")?;
                        }
                    }
                }
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, Option<i64>),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<SpannedTok>, ExprError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let pos = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => toks.push(SpannedTok { tok: Tok::Plus, pos }),
            '-' => toks.push(SpannedTok { tok: Tok::Minus, pos }),
            '*' => toks.push(SpannedTok { tok: Tok::Star, pos }),
            '/' => toks.push(SpannedTok { tok: Tok::Slash, pos }),
            '^' => toks.push(SpannedTok { tok: Tok::Caret, pos }),
            '(' => toks.push(SpannedTok { tok: Tok::LParen, pos }),
            ')' => toks.push(SpannedTok { tok: Tok::RParen, pos }),
            '0'..='9' => {
                let mut j = i;
                let mut integral = true;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    integral = false;
                    j += 1;
                    if j >= bytes.len() || !bytes[j].is_ascii_digit() {
                        return Err(ExprError::Parse {
                            pos: j.min(bytes.len()),
                            msg: "expected digits after decimal point".into(),
                        });
                    }
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        integral = false;
                        j = k;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let slice = &text[i..j];
                let value: f64 = slice.parse().map_err(|_| ExprError::Parse {
                    pos,
                    msg: format!("invalid number literal `{slice}`"),
                })?;
                if !value.is_finite() {
                    return Err(ExprError::Parse {
                        pos,
                        msg: format!("number literal `{slice}` overflows"),
                    });
                }
                let int = if integral { slice.parse::<i64>().ok() } else { None };
                toks.push(SpannedTok {
                    tok: Tok::Num(value, int),
                    pos,
                });
                i = j;
                continue;
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                toks.push(SpannedTok {
                    tok: Tok::Ident(text[i..j].to_string()),
                    pos,
                });
                i = j;
                continue;
            }
            _ => {
                return Err(ExprError::Parse {
                    pos,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
        i += 1;
    }
    toks.push(SpannedTok {
        tok: Tok::Eof,
        pos: bytes.len(),
    });
    Ok(toks)
}

/// Hard ceiling on `(`/function nesting. Recursive descent burns several
/// stack frames per level (measured ≈ 6 KB each unoptimized), so unbounded
/// nesting lets a hostile input overflow the stack instead of failing with
/// a parse error. 64 levels stay well inside a 1 MB thread stack.
const MAX_NESTING: usize = 64;

/// Hard ceiling on tokens per expression. Long flat chains build trees whose
/// depth later drives recursion in evaluation, differentiation, and drop
/// (measured ≈ 1.3 KB of evaluation stack per chained term unoptimized);
/// bounding the token count bounds that depth so worker threads with small
/// stacks can evaluate any accepted expression.
const MAX_TOKENS: usize = 1024;

struct Parser<'a> {
    toks: Vec<SpannedTok>,
    at: usize,
    depth: usize,
    spec: JetSpec,
    params: &'a BTreeMap<String, f64>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> usize {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> SpannedTok {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    /// A parenthesized or function-argument subexpression: one nesting level.
    fn nested_expr(&mut self, pos: usize) -> Result<Expr, ExprError> {
        if self.depth >= MAX_NESTING {
            return Err(ExprError::Parse {
                pos,
                msg: format!("expression nests more than {MAX_NESTING} levels deep"),
            });
        }
        self.depth += 1;
        let e = self.expr();
        self.depth -= 1;
        e
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(ExprError::Parse {
                pos: self.pos(),
                msg: "expected `)`".into(),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = Expr::add(acc, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = Expr::sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = Expr::mul(acc, self.factor()?);
                }
                Tok::Slash => {
                    self.bump();
                    acc = Expr::div(acc, self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let negated = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let base = self.base()?;
        let powed = if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.exponent()?;
            Expr::pow(base, e)
        } else {
            base
        };
        Ok(if negated { Expr::neg(powed) } else { powed })
    }

    fn exponent(&mut self) -> Result<Exponent, ExprError> {
        let negated = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            SpannedTok {
                tok: Tok::Num(v, int),
                ..
            } => Ok(match int {
                Some(n) => Exponent::Int(if negated { -n } else { n }),
                None => Exponent::Real(if negated { -v } else { v }),
            }),
            SpannedTok { pos, .. } => Err(ExprError::Parse {
                pos,
                msg: "expected a numeric exponent".into(),
            }),
        }
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        match self.bump() {
            SpannedTok {
                tok: Tok::Num(v, _),
                ..
            } => Ok(Expr::Const(v)),
            SpannedTok {
                tok: Tok::LParen,
                pos,
            } => {
                let inner = self.nested_expr(pos)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            SpannedTok {
                tok: Tok::Ident(name),
                pos,
            } => {
                if let Some(f) = UnaryFn::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(ExprError::Parse {
                            pos: self.pos(),
                            msg: format!("expected `(` after function `{name}`"),
                        });
                    }
                    let open = self.bump();
                    let arg = self.nested_expr(open.pos)?;
                    self.expect_rparen()?;
                    return Ok(Expr::unary(f, arg));
                }
                if let Some(value) = self.params.get(&name) {
                    return Ok(Expr::Const(*value));
                }
                self.classify_var(&name, pos)
            }
            SpannedTok { tok, pos } => Err(ExprError::Parse {
                pos,
                msg: format!("expected a value, found {tok:?}"),
            }),
        }
    }

    fn classify_var(&self, name: &str, pos: usize) -> Result<Expr, ExprError> {
        if name == "t" {
            return Ok(Expr::Var(JetVar::T));
        }
        if let Some(rest) = name.strip_prefix('u') {
            let (alpha_str, order_str) = match rest.split_once('_') {
                Some((a, o)) => (a, Some(o)),
                None => (rest, None),
            };
            let alpha_ok = !alpha_str.is_empty() && alpha_str.bytes().all(|b| b.is_ascii_digit());
            let order_ok = order_str
                .map(|o| !o.is_empty() && o.bytes().all(|b| b.is_ascii_digit()))
                .unwrap_or(true);
            if alpha_ok && order_ok {
                let alpha: u32 = alpha_str.parse().map_err(|_| ExprError::Parse {
                    pos,
                    msg: format!("variable index overflow in `{name}`"),
                })?;
                let order: u32 = match order_str {
                    Some(o) => o.parse().map_err(|_| ExprError::Parse {
                        pos,
                        msg: format!("derivative order overflow in `{name}`"),
                    })?,
                    None => 0,
                };
                let var = JetVar::U { alpha, order };
                if !self.spec.contains(var) || alpha == 0 {
                    return Err(ExprError::OutOfSignature {
                        name: name.to_string(),
                        pos,
                        m: self.spec.m,
                        q: self.spec.q,
                    });
                }
                return Ok(Expr::Var(var));
            }
        }
        Err(ExprError::UndeclaredVariable {
            name: name.to_string(),
            pos,
        })
    }
}

/// Parse one side of an equation (no `=`) against a signature, substituting
/// named parameters by their values before the tree is built.
pub fn parse_expr_text(
    text: &str,
    spec: JetSpec,
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    let toks = lex(text)?;
    // `toks` carries a trailing Eof marker that is not a real token.
    if toks.len() - 1 > MAX_TOKENS {
        return Err(ExprError::Parse {
            pos: toks[MAX_TOKENS].pos,
            msg: format!("expression exceeds {MAX_TOKENS} tokens"),
        });
    }
    let mut p = Parser {
        toks,
        at: 0,
        depth: 0,
        spec,
        params,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(ExprError::Parse {
            pos: p.pos(),
            msg: format!("unexpected trailing input, found {:?}", p.peek()),
        });
    }
    Ok(e)
}

/// Parse equation text. A single `=` rewrites `lhs = rhs` to `lhs - rhs`.
pub fn parse_equation(
    text: &str,
    spec: JetSpec,
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    let mut split = text.splitn(3, '=');
    let first = split.next().unwrap_or("");
    match (split.next(), split.next()) {
        (None, _) => parse_expr_text(first, spec, params),
        (Some(second), None) => {
            let lhs = parse_expr_text(first, spec, params)?;
            let rhs = parse_expr_text(second, spec, params).map_err(|e| shift_pos(e, first.len() + 1))?;
            Ok(Expr::sub(lhs, rhs))
        }
        (Some(second), Some(_)) => Err(ExprError::MultipleEquals {
            pos: first.len() + 1 + second.len(),
        }),
    }
}

fn shift_pos(e: ExprError, by: usize) -> ExprError {
    match e {
        ExprError::Parse { pos, msg } => ExprError::Parse { pos: pos + by, msg },
        ExprError::UndeclaredVariable { name, pos } => {
            ExprError::UndeclaredVariable { name, pos: pos + by }
        }
        ExprError::OutOfSignature { name, pos, m, q } => {
            ExprError::OutOfSignature { name, pos: pos + by, m, q }
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Equation systems.
// ---------------------------------------------------------------------------

/// Cached symbolic gradient of one equation: `d/dt` and `d/du^alpha_k` for
/// every coordinate.
#[derive(Debug, Clone)]
pub struct EquationPartials {
    /// Partial derivatives in flat coordinate order (index 0 is `d/dt`).
    pub by_coord: Vec<Expr>,
}

/// A system of `k` scalar equations `F_i = 0` over a fixed jet signature.
#[derive(Debug, Clone)]
pub struct EquationSystem {
    spec: JetSpec,
    equations: Vec<Expr>,
    labels: Vec<Option<String>>,
    partials: Vec<EquationPartials>,
}

impl EquationSystem {
    /// Build and validate a system. Requirements: `m ≥ 1`, `q ≥ 1`, at least
    /// one equation, at least one equation referencing a derivative of order
    /// `q`, and `k ≥ m` (the system is assumed not underdetermined; the count
    /// condition is the checkable part of that assumption).
    pub fn new(
        spec: JetSpec,
        equations: Vec<Expr>,
        labels: Vec<Option<String>>,
    ) -> Result<Self, ExprError> {
        if spec.q < 1 {
            return Err(ExprError::Validation("jet order q must be at least 1".into()));
        }
        if equations.is_empty() {
            return Err(ExprError::Validation("at least one equation required".into()));
        }
        if (equations.len() as u32) < spec.m {
            return Err(ExprError::Validation(format!(
                "underdetermined system: {} equations for m={} dependent variables",
                equations.len(),
                spec.m
            )));
        }
        if !labels.is_empty() && labels.len() != equations.len() {
            return Err(ExprError::Validation(
                "labels, when present, must match the number of equations".into(),
            ));
        }
        let attained = equations
            .iter()
            .filter_map(|e| e.max_order())
            .max()
            .unwrap_or(0);
        if attained < spec.q {
            return Err(ExprError::Validation(format!(
                "no equation references a derivative of order q={}",
                spec.q
            )));
        }
        let labels = if labels.is_empty() {
            vec![None; equations.len()]
        } else {
            labels
        };
        let partials = equations
            .iter()
            .map(|f| EquationPartials {
                by_coord: spec.vars().iter().map(|&v| f.diff(v)).collect(),
            })
            .collect();
        Ok(Self {
            spec,
            equations,
            labels,
            partials,
        })
    }

    pub fn spec(&self) -> JetSpec {
        self.spec
    }

    /// Number of equations.
    pub fn k(&self) -> usize {
        self.equations.len()
    }

    pub fn equations(&self) -> &[Expr] {
        &self.equations
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels[i].as_deref()
    }

    pub fn partials(&self, i: usize) -> &EquationPartials {
        &self.partials[i]
    }

    /// Residual vector `F(p)`.
    pub fn residual(&self, p: &JetPoint) -> Result<Vec<f64>, EvalError> {
        self.equations.iter().map(|f| f.eval(p)).collect()
    }

    /// Euclidean norm of the residual.
    pub fn residual_norm(&self, p: &JetPoint) -> Result<f64, EvalError> {
        Ok(self
            .residual(p)?
            .iter()
            .map(|r| r * r)
            .sum::<f64>()
            .sqrt())
    }

    /// Full Jacobian `dF(p)`, one row per equation, columns in flat
    /// coordinate order.
    pub fn jacobian(&self, p: &JetPoint) -> Result<nalgebra::DMatrix<f64>, EvalError> {
        let n = self.spec.ambient_dim();
        let mut out = nalgebra::DMatrix::zeros(self.k(), n);
        for (i, parts) in self.partials.iter().enumerate() {
            for (j, d) in parts.by_coord.iter().enumerate() {
                out[(i, j)] = d.eval(p)?;
            }
        }
        Ok(out)
    }

    /// Highest derivative order any equation attains.
    pub fn max_order(&self) -> u32 {
        self.equations
            .iter()
            .filter_map(|e| e.max_order())
            .max()
            .unwrap_or(0)
    }

    /// Per-equation highest derivative order (0 when none occurs).
    pub fn orders(&self) -> Vec<u32> {
        self.equations
            .iter()
            .map(|e| e.max_order().unwrap_or(0))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Equation files.
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct EquationFileRaw {
    m: u32,
    q: u32,
    equations: Vec<String>,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
    #[serde(default)]
    labels: Vec<String>,
}

/// Largest dependent-variable count accepted from a file.
pub const MAX_FILE_M: u32 = 16;
/// Largest jet order accepted from a file.
pub const MAX_FILE_Q: u32 = 16;

/// Load an equation system from its JSON description:
///
/// ```json
/// {
///   "m": 1, "q": 2,
///   "equations": ["t^2*u1_2 = a*t*u1_1 + b*u1_0 - c*(u1_1 - 1)^2"],
///   "parameters": {"a": 1.0, "b": 1.0, "c": 1.0},
///   "labels": ["balanced growth"]
/// }
/// ```
///
/// Parameter values are substituted before parsing; parameter names must not
/// collide with `t`, jet variables, or function names.
pub fn load_equation_system(json: &str) -> Result<EquationSystem, ExprError> {
    let raw: EquationFileRaw =
        serde_json::from_str(json).map_err(|e| ExprError::File(e.to_string()))?;
    if raw.m < 1 {
        return Err(ExprError::Validation("m must be at least 1".into()));
    }
    // A tiny file declaring an enormous signature would otherwise drive
    // allocations proportional to `m·q` downstream; reject it here.
    if raw.m > MAX_FILE_M || raw.q > MAX_FILE_Q {
        return Err(ExprError::Validation(format!(
            "signature m={}, q={} is outside the supported file range (m ≤ {MAX_FILE_M}, q ≤ {MAX_FILE_Q})",
            raw.m, raw.q
        )));
    }
    let spec = JetSpec::new(raw.m, raw.q);
    for name in raw.parameters.keys() {
        let reserved = name == "t"
            || UnaryFn::from_name(name).is_some()
            || looks_like_jet_var(name);
        if reserved {
            return Err(ExprError::Validation(format!(
                "parameter name `{name}` collides with a variable or function"
            )));
        }
        if !name
            .bytes()
            .next()
            .map(|b| b.is_ascii_alphabetic() || b == b'_')
            .unwrap_or(false)
        {
            return Err(ExprError::Validation(format!(
                "parameter name `{name}` is not a valid identifier"
            )));
        }
    }
    let equations = raw
        .equations
        .iter()
        .map(|text| parse_equation(text, spec, &raw.parameters))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = raw.labels.into_iter().map(Some).collect::<Vec<_>>();
    EquationSystem::new(spec, equations, labels)
}

fn looks_like_jet_var(name: &str) -> bool {
    let Some(rest) = name.strip_prefix('u') else {
        return false;
    };
    let (a, o) = match rest.split_once('_') {
        Some((a, o)) => (a, o),
        None => (rest, "0"),
    };
    !a.is_empty()
        && !o.is_empty()
        && a.bytes().all(|b| b.is_ascii_digit())
        && o.bytes().all(|b| b.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec11() -> JetSpec {
        JetSpec::new(1, 1)
    }

    fn pt(spec: JetSpec, coords: &[f64]) -> JetPoint {
        JetPoint::new(spec, coords.to_vec())
    }

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn parses_and_evaluates_reference_equation() {
        let e = parse_expr_text(
            "(1+t^2)*u1_1^2 + u1_0^2 - (1+sin(2*t)/2)^2",
            spec11(),
            &no_params(),
        )
        .unwrap();
        let p = pt(spec11(), &[0.5, 0.3, -0.7]);
        let r = 1.0 + (1.0f64).sin() / 2.0;
        let expect = 1.25 * 0.49 + 0.09 - r * r;
        assert!((e.eval(&p).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn equals_sign_rewrites_to_difference() {
        let e = parse_equation("u1_1 = u1_0", spec11(), &no_params()).unwrap();
        let p = pt(spec11(), &[0.0, 2.0, 3.0]);
        assert_eq!(e.eval(&p).unwrap(), 1.0);
        let err = parse_equation("u1_1 = u1_0 = t", spec11(), &no_params());
        assert!(matches!(err, Err(ExprError::MultipleEquals { .. })));
    }

    #[test]
    fn reports_error_positions() {
        let err = parse_expr_text("u1_0 + * t", spec11(), &no_params()).unwrap_err();
        match err {
            ExprError::Parse { pos, .. } => assert_eq!(pos, 7),
            other => panic!("unexpected: {other:?}"),
        }
        let err = parse_expr_text("u1_0 + vorticity", spec11(), &no_params()).unwrap_err();
        match err {
            ExprError::UndeclaredVariable { name, pos } => {
                assert_eq!(name, "vorticity");
                assert_eq!(pos, 7);
            }
            other => panic!("unexpected: {other:?}"),
        }
        let err = parse_expr_text("u2_0 + t", spec11(), &no_params()).unwrap_err();
        assert!(matches!(err, ExprError::OutOfSignature { .. }));
        let err = parse_expr_text("u1_2", spec11(), &no_params()).unwrap_err();
        assert!(matches!(err, ExprError::OutOfSignature { .. }));
    }

    #[test]
    fn alias_u_means_order_zero() {
        let a = parse_expr_text("u1", spec11(), &no_params()).unwrap();
        let b = parse_expr_text("u1_0", spec11(), &no_params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hostile_inputs_fail_cleanly() {
        // Nesting just under the ceiling parses; past it, a parse error —
        // never a stack overflow.
        let deep_ok = format!("{}t{}", "(".repeat(63), ")".repeat(63));
        parse_expr_text(&deep_ok, spec11(), &no_params()).unwrap();
        let deep = format!("{}t{}", "(".repeat(300), ")".repeat(300));
        match parse_expr_text(&deep, spec11(), &no_params()).unwrap_err() {
            ExprError::Parse { msg, .. } => assert!(msg.contains("nests"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }
        let nested_fn = format!("{}t{}", "neg(".repeat(300), ")".repeat(300));
        match parse_expr_text(&nested_fn, spec11(), &no_params()).unwrap_err() {
            ExprError::Parse { msg, .. } => assert!(msg.contains("nests"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }

        // Flat chains past the token ceiling are rejected before they can
        // build a tree deep enough to break recursive evaluation; the same
        // guard catches pathological nesting long before the lexer's output
        // could matter.
        let chain = vec!["t"; 100_000].join("+");
        match parse_expr_text(&chain, spec11(), &no_params()).unwrap_err() {
            ExprError::Parse { msg, .. } => assert!(msg.contains("tokens"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }
        let huge = format!("{}t{}", "(".repeat(100_000), ")".repeat(100_000));
        assert!(parse_expr_text(&huge, spec11(), &no_params()).is_err());
        let chain_ok = vec!["t"; 400].join("+");
        let e = parse_expr_text(&chain_ok, spec11(), &no_params()).unwrap();
        assert_eq!(e.eval(&pt(spec11(), &[0.5, 0.0, 0.0])).unwrap(), 200.0);
    }

    #[test]
    fn equation_file_rejects_oversized_signature() {
        let err = load_equation_system(
            r#"{"m": 1, "q": 1000000000, "equations": ["u1_1000000000"]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ExprError::Validation(_)), "unexpected: {err:?}");
        let err = load_equation_system(r#"{"m": 4000000, "q": 1, "equations": ["u1_1"]}"#)
            .unwrap_err();
        assert!(matches!(err, ExprError::Validation(_)));
    }

    #[test]
    fn evaluation_domain_errors() {
        let e = parse_expr_text("u1_0 / t", spec11(), &no_params()).unwrap();
        assert_eq!(
            e.eval(&pt(spec11(), &[0.0, 1.0, 0.0])).unwrap_err(),
            EvalError::DivisionByZero
        );
        let e = parse_expr_text("ln(t)", spec11(), &no_params()).unwrap();
        assert!(matches!(
            e.eval(&pt(spec11(), &[-1.0, 0.0, 0.0])).unwrap_err(),
            EvalError::LogNonPositive(_)
        ));
        assert!(matches!(
            e.eval(&pt(spec11(), &[0.0, 0.0, 0.0])).unwrap_err(),
            EvalError::LogNonPositive(_)
        ));
        let e = parse_expr_text("sqrt(t)", spec11(), &no_params()).unwrap();
        assert!(matches!(
            e.eval(&pt(spec11(), &[-0.5, 0.0, 0.0])).unwrap_err(),
            EvalError::SqrtNegative(_)
        ));
        let e = parse_expr_text("t^-2", spec11(), &no_params()).unwrap();
        assert!(matches!(
            e.eval(&pt(spec11(), &[0.0, 0.0, 0.0])).unwrap_err(),
            EvalError::ZeroToNegative(_)
        ));
        let e = parse_expr_text("t^0.5", spec11(), &no_params()).unwrap();
        assert!(matches!(
            e.eval(&pt(spec11(), &[-1.0, 0.0, 0.0])).unwrap_err(),
            EvalError::NegativeBase { .. }
        ));
    }

    #[test]
    fn differentiation_exact_cases() {
        let u = JetVar::U { alpha: 1, order: 0 };
        let du = JetVar::U { alpha: 1, order: 1 };
        // d/du1_1 of u1_1^2 = 2*u1_1, with neutral elements absorbed.
        let e = parse_expr_text("u1_1^2", spec11(), &no_params()).unwrap();
        assert_eq!(
            e.diff(du),
            Expr::mul(Expr::Const(2.0), Expr::Var(du))
        );
        // d/dt of t + 1 = 1.
        let e = parse_expr_text("t + 1", spec11(), &no_params()).unwrap();
        assert_eq!(e.diff(JetVar::T), Expr::Const(1.0));
        // d/du of sin(u)*t at (t,u) = (2, 0.3).
        let e = parse_expr_text("sin(u1_0)*t", spec11(), &no_params()).unwrap();
        let d = e.diff(u);
        let p = pt(spec11(), &[2.0, 0.3, 0.0]);
        assert!((d.eval(&p).unwrap() - 2.0 * (0.3f64).cos()).abs() < 1e-15);
    }

    #[test]
    fn differentiation_matches_central_differences() {
        let spec = JetSpec::new(2, 2);
        let samples = [
            "(1+t^2)*u1_1^2 + u1_0^2 - (1 + t^3/3)^2",
            "t^2*u1_2 - t*u1_1 - u1_0 + (u1_1 - 1)^2",
            "exp(u1_0/4) * sin(t) - cos(u2_1)",
            "sqrt(1 + u1_0^2) / (2 + cos(t))",
            "ln(2 + sin(u2_0)) + u1_1^3 - u2_2/(3 + t^2)",
            "neg(u1_0) + t^2.5 - 2^3",
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for text in samples {
            let f = parse_expr_text(text, spec, &no_params()).unwrap();
            for _ in 0..8 {
                let coords: Vec<f64> = (0..spec.ambient_dim())
                    .map(|_| rng.random_range(0.2..1.8))
                    .collect();
                let p = JetPoint::new(spec, coords.clone());
                for (i, &v) in spec.vars().iter().enumerate() {
                    let sym = match f.diff(v).eval(&p) {
                        Ok(x) => x,
                        Err(_) => continue,
                    };
                    let h = 1e-6 * (1.0 + coords[i].abs());
                    let mut up = coords.clone();
                    up[i] += h;
                    let mut dn = coords.clone();
                    dn[i] -= h;
                    let fu = f.eval(&JetPoint::new(spec, up)).unwrap();
                    let fd = f.eval(&JetPoint::new(spec, dn)).unwrap();
                    let num = (fu - fd) / (2.0 * h);
                    assert!(
                        (sym - num).abs() <= 2e-5 * (1.0 + sym.abs().max(num.abs())),
                        "d/d{v} of `{text}`: symbolic {sym} vs numeric {num}"
                    );
                }
            }
        }
    }

    #[test]
    fn print_parse_is_identity_on_parsed_trees() {
        let spec = JetSpec::new(2, 2);
        let samples = [
            "(1+t^2)*u1_1^2 + u1_0^2 - (1+sin(2*t)/2)^2",
            "t^2*u1_2 - (t*u1_1 + u1_0 - (u1_1 - 1)^2)",
            "-t^2 + 4/u2_1/t - 2*(u1_0 - u2_0)*3",
            "sqrt(u1_0^2 + 1) - exp(neg(t)) * ln(u2_0 + 3)",
            "t^-3 + u1_1^2.5 - 1.25e-2*t",
            "1 - (2 - (3 - (4 - t)))",
        ];
        for text in samples {
            let a = parse_expr_text(text, spec, &no_params()).unwrap();
            let printed = a.to_string();
            let b = parse_expr_text(&printed, spec, &no_params())
                .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
            assert_eq!(a, b, "print/parse mismatch for `{text}` -> `{printed}`");
        }
    }

    fn random_expr(rng: &mut ChaCha8Rng, spec: JetSpec, depth: u32) -> Expr {
        if depth == 0 || rng.random_range(0..10) < 2 {
            return match rng.random_range(0..3) {
                0 => Expr::Const((rng.random_range(-40..40) as f64) / 8.0),
                1 => Expr::Var(JetVar::T),
                _ => {
                    let alpha = rng.random_range(1..=spec.m);
                    let order = rng.random_range(0..=spec.q);
                    Expr::Var(JetVar::U { alpha, order })
                }
            };
        }
        match rng.random_range(0..8) {
            0 => Expr::Bin(
                BinOp::Add,
                Box::new(random_expr(rng, spec, depth - 1)),
                Box::new(random_expr(rng, spec, depth - 1)),
            ),
            1 => Expr::Bin(
                BinOp::Sub,
                Box::new(random_expr(rng, spec, depth - 1)),
                Box::new(random_expr(rng, spec, depth - 1)),
            ),
            2 => Expr::Bin(
                BinOp::Mul,
                Box::new(random_expr(rng, spec, depth - 1)),
                Box::new(random_expr(rng, spec, depth - 1)),
            ),
            3 => Expr::Bin(
                BinOp::Div,
                Box::new(random_expr(rng, spec, depth - 1)),
                Box::new(random_expr(rng, spec, depth - 1)),
            ),
            4 => Expr::Pow(
                Box::new(random_expr(rng, spec, depth - 1)),
                if rng.random_bool(0.5) {
                    Exponent::Int(rng.random_range(-3..5))
                } else {
                    Exponent::Real(rng.random_range(-2.0..3.0))
                },
            ),
            5 => Expr::Unary(UnaryFn::Neg, Box::new(random_expr(rng, spec, depth - 1))),
            6 => Expr::Unary(UnaryFn::Sin, Box::new(random_expr(rng, spec, depth - 1))),
            _ => Expr::Unary(UnaryFn::Exp, Box::new(random_expr(rng, spec, depth - 1))),
        }
    }

    #[test]
    fn print_parse_fixpoint_on_random_trees() {
        let spec = JetSpec::new(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let raw = random_expr(&mut rng, spec, 4);
            let once = parse_expr_text(&raw.to_string(), spec, &no_params())
                .unwrap_or_else(|e| panic!("`{raw}` failed to reparse: {e}"));
            let twice = parse_expr_text(&once.to_string(), spec, &no_params()).unwrap();
            assert_eq!(once, twice, "fixpoint failed for `{raw}`");
        }
    }

    #[test]
    fn equation_file_round_trip() {
        let json = r#"{
            "m": 1, "q": 2,
            "equations": ["t^2*u1_2 = a*t*u1_1 + b*u1_0 - c*(u1_1 - 1)^2"],
            "parameters": {"a": 1.0, "b": 1.0, "c": 1.0},
            "labels": ["balanced growth"]
        }"#;
        let sys = load_equation_system(json).unwrap();
        assert_eq!(sys.k(), 1);
        assert_eq!(sys.spec(), JetSpec::new(1, 2));
        assert_eq!(sys.label(0), Some("balanced growth"));
        assert_eq!(sys.orders(), vec![2]);
        // F = t^2 ü − (t u̇ + u − (u̇−1)^2) at (1, 2, 3, 4): 4 − (3 + 2 − 4) = 3.
        let p = pt(sys.spec(), &[1.0, 2.0, 3.0, 4.0]);
        assert!((sys.residual(&p).unwrap()[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn equation_file_rejects_bad_input() {
        assert!(matches!(
            load_equation_system("{not json"),
            Err(ExprError::File(_))
        ));
        // Parameter shadowing a variable.
        let json = r#"{"m":1,"q":1,"equations":["u1_1 - t"],"parameters":{"t": 3.0}}"#;
        assert!(matches!(
            load_equation_system(json),
            Err(ExprError::Validation(_))
        ));
        // No equation attains order q.
        let json = r#"{"m":1,"q":2,"equations":["u1_1 - u1_0"]}"#;
        assert!(matches!(
            load_equation_system(json),
            Err(ExprError::Validation(_))
        ));
        // Underdetermined: one equation, two unknowns.
        let json = r#"{"m":2,"q":1,"equations":["u1_1 - u2_0"]}"#;
        assert!(matches!(
            load_equation_system(json),
            Err(ExprError::Validation(_))
        ));
        // q = 0 rejected.
        let json = r#"{"m":1,"q":0,"equations":["u1_0 - t"]}"#;
        assert!(load_equation_system(json).is_err());
    }

    #[test]
    fn system_jacobian_matches_partials() {
        let json = r#"{"m":1,"q":1,"equations":["(1+t^2)*u1_1^2 + u1_0^2 - 4"]}"#;
        let sys = load_equation_system(json).unwrap();
        let p = pt(sys.spec(), &[1.0, 0.5, -0.5]);
        let j = sys.jacobian(&p).unwrap();
        // Rows: [2t·u̇², 2u, 2(1+t²)u̇].
        assert!((j[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((j[(0, 1)] - 1.0).abs() < 1e-14);
        assert!((j[(0, 2)] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn substitute_replaces_and_simplifies() {
        let spec = JetSpec::new(1, 2);
        let f = parse_expr_text("t^2*u1_2 + u1_1*u1_2 - u1_0", spec, &no_params()).unwrap();
        let top = JetVar::U { alpha: 1, order: 2 };
        let g = f.substitute(top, &Expr::Const(0.0));
        assert_eq!(g.max_order(), Some(0));
        let p = pt(spec, &[3.0, 7.0, 9.0, 11.0]);
        assert_eq!(g.eval(&p).unwrap(), -7.0);
    }
}
