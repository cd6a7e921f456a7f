//! Continuous symbols `φ : C^n → C` given by a small expression language.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'i' | 'pi' | var | func '(' expr (',' expr)* ')' | '(' expr ')'
//! var   := 'z' | 'w' | 'z1' … 'z9' | 'w1' … 'w9'      (z and w name the first coordinate)
//! func  := conj | abs2 | abs | re | im | sqrt | exp | max | min | clamp
//!        | dist | dist_torus
//! ```
//!
//! `clamp(x)` clamps the real part to `[0, 1]`, `clamp(x, lo, hi)` to `[lo, hi]`.
//! `dist(c_1, …, c_n)` is the Euclidean distance from `z` to the point `c`;
//! `dist_torus(r_1, …, r_n)` is `(Σ_j (|z_j| - r_j)²)^{1/2}`, the distance to the
//! torus `{|z_j| = r_j}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domains::Domain;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Conj,
    Abs2,
    Abs,
    Re,
    Im,
    Sqrt,
    Exp,
    Max,
    Min,
    Clamp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Conj => "conj",
            Func::Abs2 => "abs2",
            Func::Abs => "abs",
            Func::Re => "re",
            Func::Im => "im",
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Max => "max",
            Func::Min => "min",
            Func::Clamp => "clamp",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "conj" => Func::Conj,
            "abs2" => Func::Abs2,
            "abs" => Func::Abs,
            "re" => Func::Re,
            "im" => Func::Im,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "max" => Func::Max,
            "min" => Func::Min,
            "clamp" => Func::Clamp,
            _ => return None,
        })
    }

    fn arity_ok(self, k: usize) -> bool {
        match self {
            Func::Max | Func::Min => k == 2,
            Func::Clamp => k == 1 || k == 3,
            _ => k == 1,
        }
    }
}

/// Expression tree. Built through the folding constructors so that constant
/// subexpressions are always collapsed.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(C64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Dist(Vec<C64>),
    DistTorus(Vec<f64>),
}

impl Expr {
    fn as_const(&self) -> Option<C64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn constant(c: C64) -> Self {
        Expr::Const(c)
    }

    pub fn var(k: usize) -> Self {
        Expr::Var(k)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Self {
        match a.as_const() {
            Some(c) => Expr::Const(-c),
            None => Expr::Neg(Box::new(a)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x / y),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Self {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(complex_pow(x, y)),
            _ => Expr::Pow(Box::new(a), Box::new(b)),
        }
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Self {
        if args.iter().all(|a| a.as_const().is_some()) {
            let vals: Vec<C64> = args.iter().filter_map(Expr::as_const).collect();
            return Expr::Const(apply(f, &vals));
        }
        Expr::Call(f, args)
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => z[*k],
            Expr::Neg(a) => -a.eval(z),
            Expr::Add(a, b) => a.eval(z) + b.eval(z),
            Expr::Sub(a, b) => a.eval(z) - b.eval(z),
            Expr::Mul(a, b) => a.eval(z) * b.eval(z),
            Expr::Div(a, b) => a.eval(z) / b.eval(z),
            Expr::Pow(a, b) => complex_pow(a.eval(z), b.eval(z)),
            Expr::Call(f, args) => {
                let vals: Vec<C64> = args.iter().map(|a| a.eval(z)).collect();
                apply(*f, &vals)
            }
            Expr::Dist(p) => {
                let d2: f64 = z.iter().zip(p).map(|(a, b)| (a - b).norm_sqr()).sum();
                C64::new(d2.sqrt(), 0.0)
            }
            Expr::DistTorus(radii) => {
                let d2: f64 = z.iter().zip(radii).map(|(a, &r)| (a.norm() - r).powi(2)).sum();
                C64::new(d2.sqrt(), 0.0)
            }
        }
    }

    /// Number of coordinates the expression refers to.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(k) => k + 1,
            Expr::Neg(a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.arity().max(b.arity())
            }
            Expr::Call(_, args) => args.iter().map(Expr::arity).max().unwrap_or(0),
            Expr::Dist(p) => p.len(),
            Expr::DistTorus(r) => r.len(),
        }
    }

    /// Expansion as `Σ c_{μν} z^μ z̄^ν` when the expression is a polynomial in `z, z̄`.
    pub fn to_polynomial(&self, n: usize) -> Option<Polynomial> {
        let poly = match self {
            Expr::Const(c) => Polynomial::constant(n, *c),
            Expr::Var(k) => {
                if *k >= n {
                    return None;
                }
                Polynomial::coordinate(n, *k)
            }
            Expr::Neg(a) => a.to_polynomial(n)?.scale(C64::new(-1.0, 0.0)),
            Expr::Add(a, b) => a.to_polynomial(n)?.add(&b.to_polynomial(n)?),
            Expr::Sub(a, b) => a.to_polynomial(n)?.add(&b.to_polynomial(n)?.scale(C64::new(-1.0, 0.0))),
            Expr::Mul(a, b) => a.to_polynomial(n)?.mul(&b.to_polynomial(n)?),
            Expr::Div(a, b) => {
                let c = b.as_const()?;
                if c == C64::new(0.0, 0.0) {
                    return None;
                }
                a.to_polynomial(n)?.scale(1.0 / c)
            }
            Expr::Pow(a, b) => {
                let e = b.as_const()?;
                if e.im != 0.0 || e.re < 0.0 || e.re.fract() != 0.0 || e.re > 64.0 {
                    return None;
                }
                let base = a.to_polynomial(n)?;
                let mut acc = Polynomial::constant(n, C64::new(1.0, 0.0));
                for _ in 0..e.re as u32 {
                    acc = acc.mul(&base);
                }
                acc
            }
            Expr::Call(f, args) => {
                let p = args[0].to_polynomial(n)?;
                match f {
                    Func::Conj => p.conj(),
                    Func::Abs2 => p.mul(&p.conj()),
                    Func::Re => p.add(&p.conj()).scale(C64::new(0.5, 0.0)),
                    Func::Im => p.add(&p.conj().scale(C64::new(-1.0, 0.0))).scale(C64::new(0.0, -0.5)),
                    _ => return None,
                }
            }
            Expr::Dist(_) | Expr::DistTorus(_) => return None,
        };
        Some(poly)
    }

    /// Structural check that the value depends only on `(|z_1|, …, |z_n|)`.
    fn radial_structure(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::DistTorus(_) => true,
            Expr::Var(_) | Expr::Dist(_) => false,
            Expr::Call(Func::Abs2 | Func::Abs, args) if matches!(args[0], Expr::Var(_)) => true,
            Expr::Neg(a) => a.radial_structure(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.radial_structure() && b.radial_structure()
            }
            Expr::Call(_, args) => args.iter().all(Expr::radial_structure),
        }
    }
}

fn complex_pow(a: C64, b: C64) -> C64 {
    if b.im == 0.0 && b.re.fract() == 0.0 && b.re.abs() <= i32::MAX as f64 {
        a.powi(b.re as i32)
    } else {
        a.powc(b)
    }
}

fn apply(f: Func, v: &[C64]) -> C64 {
    let real = |x: f64| C64::new(x, 0.0);
    match f {
        Func::Conj => v[0].conj(),
        Func::Abs2 => real(v[0].norm_sqr()),
        Func::Abs => real(v[0].norm()),
        Func::Re => real(v[0].re),
        Func::Im => real(v[0].im),
        Func::Sqrt => v[0].sqrt(),
        Func::Exp => v[0].exp(),
        Func::Max => real(v[0].re.max(v[1].re)),
        Func::Min => real(v[0].re.min(v[1].re)),
        Func::Clamp => {
            let (lo, hi) = if v.len() == 3 { (v[1].re, v[2].re) } else { (0.0, 1.0) };
            real(v[0].re.max(lo).min(hi))
        }
    }
}

fn fmt_const(c: C64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        if c.re.is_sign_negative() {
            write!(f, "({:?})", c.re)
        } else {
            write!(f, "{:?}", c.re)
        }
    } else {
        write!(f, "({:?}+{:?}*i)", c.re, c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_const(*c, f),
            Expr::Var(k) => write!(f, "z{}", k + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Expr::Dist(p) => {
                write!(f, "dist(")?;
                for (i, c) in p.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    fmt_const(*c, f)?;
                }
                write!(f, ")")
            }
            Expr::DistTorus(r) => {
                write!(f, "dist_torus(")?;
                for (i, x) in r.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    fmt_const(C64::new(*x, 0.0), f)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// `Σ c_{μν} z^μ z̄^ν` keyed by `(μ, ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<(Vec<u32>, Vec<u32>), C64>,
}

impl Polynomial {
    pub fn constant(n: usize, c: C64) -> Self {
        let mut terms = BTreeMap::new();
        if c != C64::new(0.0, 0.0) {
            terms.insert((vec![0; n], vec![0; n]), c);
        }
        Self { n, terms }
    }

    pub fn coordinate(n: usize, k: usize) -> Self {
        let mut mu = vec![0; n];
        mu[k] = 1;
        let mut terms = BTreeMap::new();
        terms.insert((mu, vec![0; n]), C64::new(1.0, 0.0));
        Self { n, terms }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Vec<u32>, C64)> {
        self.terms.iter().map(|((m, v), c)| (m, v, *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn insert(&mut self, key: (Vec<u32>, Vec<u32>), c: C64) {
        let e = self.terms.entry(key).or_insert(C64::new(0.0, 0.0));
        *e += c;
        // exact cancellation drops the term
        if *e == C64::new(0.0, 0.0) {
            self.terms.retain(|_, v| *v != C64::new(0.0, 0.0));
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.insert(k.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self { n: self.n, terms: BTreeMap::new() };
        for (k, c) in &self.terms {
            out.insert(k.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self { n: self.n, terms: BTreeMap::new() };
        for ((m1, v1), c1) in &self.terms {
            for ((m2, v2), c2) in &other.terms {
                let m: Vec<u32> = m1.iter().zip(m2).map(|(a, b)| a + b).collect();
                let v: Vec<u32> = v1.iter().zip(v2).map(|(a, b)| a + b).collect();
                out.insert((m, v), c1 * c2);
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = Self { n: self.n, terms: BTreeMap::new() };
        for ((m, v), c) in &self.terms {
            out.insert((v.clone(), m.clone()), c.conj());
        }
        out
    }

    /// Largest `|μ|` (holomorphic degree).
    pub fn holomorphic_degree(&self) -> u32 {
        self.terms.keys().map(|(m, _)| m.iter().sum()).max().unwrap_or(0)
    }

    /// Largest `|ν|` (antiholomorphic degree).
    pub fn antiholomorphic_degree(&self) -> u32 {
        self.terms.keys().map(|(_, v)| v.iter().sum()).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|(m, v)| m.iter().sum::<u32>() + v.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn is_holomorphic(&self) -> bool {
        self.antiholomorphic_degree() == 0
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|((m, v), c)| {
                let mut t = *c;
                for (j, zj) in z.iter().enumerate() {
                    t *= zj.powu(m[j]) * zj.conj().powu(v[j]);
                }
                t
            })
            .sum()
    }
}

/// How a symbol can be integrated against monomials.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolTag {
    Polynomial(Polynomial),
    Radial,
    General,
}

/// A continuous symbol, shared by reference.
#[derive(Debug, Clone)]
pub struct Symbol {
    expr: Arc<Expr>,
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.expr, &other.expr) || self.expr == other.expr
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

impl std::str::FromStr for Symbol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Symbol::parse(s)
    }
}

impl Symbol {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, len: src.len() };
        let expr = p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(Error::SymbolParse {
                pos: t.pos,
                message: "unexpected trailing input".into(),
            });
        }
        Ok(Self::from_expr(expr))
    }

    pub fn from_expr(expr: Expr) -> Self {
        Self { expr: Arc::new(expr) }
    }

    pub fn constant(c: C64) -> Self {
        Self::from_expr(Expr::Const(c))
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn conj(&self) -> Self {
        Self::from_expr(Expr::call(Func::Conj, vec![(*self.expr).clone()]))
    }

    /// `a · b`.
    pub fn times(&self, other: &Self) -> Self {
        Self::from_expr(Expr::mul((*self.expr).clone(), (*other.expr).clone()))
    }

    /// Product of the list in the order written.
    pub fn product(list: &[Symbol]) -> Self {
        let mut it = list.iter();
        match it.next() {
            None => Self::one(),
            Some(first) => it.fold(first.clone(), |acc, s| acc.times(s)),
        }
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        self.expr.eval(z)
    }

    pub fn arity(&self) -> usize {
        self.expr.arity()
    }

    /// Errors if the symbol needs more coordinates than `n`, or a point argument
    /// has the wrong length.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        fn walk(e: &Expr, n: usize) -> Result<()> {
            match e {
                Expr::Var(k) if *k >= n => Err(Error::Parameter(format!(
                    "symbol uses coordinate z{} but the domain has dimension {n}",
                    k + 1
                ))),
                Expr::Dist(p) if p.len() != n => Err(Error::DimensionMismatch { expected: n, found: p.len() }),
                Expr::DistTorus(p) if p.len() != n => Err(Error::DimensionMismatch { expected: n, found: p.len() }),
                Expr::Neg(a) => walk(a, n),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                    walk(a, n)?;
                    walk(b, n)
                }
                Expr::Call(_, args) => args.iter().try_for_each(|a| walk(a, n)),
                _ => Ok(()),
            }
        }
        walk(&self.expr, n)
    }

    pub fn to_polynomial(&self, n: usize) -> Option<Polynomial> {
        self.expr.to_polynomial(n)
    }

    pub fn is_radial(&self, n: usize) -> bool {
        if let Some(p) = self.to_polynomial(n) {
            return p.terms().all(|(m, v, _)| m == v);
        }
        self.expr.radial_structure()
    }

    pub fn tag(&self, n: usize) -> SymbolTag {
        if let Some(p) = self.to_polynomial(n) {
            SymbolTag::Polynomial(p)
        } else if self.expr.radial_structure() {
            SymbolTag::Radial
        } else {
            SymbolTag::General
        }
    }

    /// `max |φ|` over boundary points along many rays and a few interior shells.
    pub fn sup_norm_estimate(&self, domain: &Domain, rays: usize) -> Result<f64> {
        self.check_dim(domain.dim())?;
        let n = domain.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut best: f64 = self.eval(&vec![C64::new(0.0, 0.0); n]).norm();
        for k in 0..rays.max(1) {
            let dir: Vec<C64> = if n == 1 {
                vec![C64::from_polar(1.0, 2.0 * PI * k as f64 / rays.max(1) as f64)]
            } else {
                (0..n)
                    .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect()
            };
            if dir.iter().all(|c| c.norm() == 0.0) {
                continue;
            }
            let edge = domain.boundary_point(&dir)?;
            for t in [0.25, 0.5, 0.75, 0.9, 0.99, 1.0] {
                let z: Vec<C64> = edge.iter().map(|c| c * t).collect();
                best = best.max(self.eval(&z).norm());
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_ascii_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::SymbolParse {
                pos: start,
                message: format!("invalid number '{text}'"),
            })?;
            out.push(Token { tok: Tok::Num(v), pos: start });
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                pos: start,
            });
        } else if "+-*/^(),".contains(ch) {
            out.push(Token { tok: Tok::Op(ch), pos: i });
            i += 1;
        } else {
            return Err(Error::SymbolParse {
                pos: i,
                message: format!("unexpected character '{}'", src[i..].chars().next().unwrap_or('?')),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |t| t.pos)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::SymbolParse {
            pos: self.here(),
            message: message.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.fail(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::add(lhs, self.term()?);
            } else if self.eat('-') {
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::mul(lhs, self.unary()?);
            } else if self.eat('/') {
                lhs = Expr::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::neg(self.unary()?));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let e = self.unary()?;
            return Ok(Expr::pow(base, e));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect('(')?;
        let mut out = vec![self.expr()?];
        while self.eat(',') {
            out.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn const_args(&mut self) -> Result<Vec<C64>> {
        let start = self.here();
        self.args()?
            .into_iter()
            .map(|a| {
                a.as_const().ok_or(Error::SymbolParse {
                    pos: start,
                    message: "point arguments must be constants".into(),
                })
            })
            .collect()
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.fail("unexpected end of input");
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(C64::new(v, 0.0)))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(c) => self.fail(format!("unexpected '{c}'")),
            Tok::Ident(name) => {
                let at = self.here();
                self.pos += 1;
                match name.as_str() {
                    "i" => return Ok(Expr::Const(C64::new(0.0, 1.0))),
                    "pi" => return Ok(Expr::Const(C64::new(PI, 0.0))),
                    "z" | "w" => return Ok(Expr::Var(0)),
                    "dist" => return Ok(Expr::Dist(self.const_args()?)),
                    "dist_torus" => {
                        let radii = self.const_args()?;
                        if radii.iter().any(|c| c.im != 0.0 || c.re < 0.0) {
                            return Err(Error::SymbolParse {
                                pos: at,
                                message: "torus radii must be nonnegative reals".into(),
                            });
                        }
                        return Ok(Expr::DistTorus(radii.iter().map(|c| c.re).collect()));
                    }
                    _ => {}
                }
                if let Some(f) = Func::from_name(&name) {
                    let args = self.args()?;
                    if !f.arity_ok(args.len()) {
                        return Err(Error::SymbolParse {
                            pos: at,
                            message: format!("{} does not take {} arguments", f.name(), args.len()),
                        });
                    }
                    return Ok(Expr::call(f, args));
                }
                let var = name
                    .strip_prefix('z')
                    .or_else(|| name.strip_prefix('w'))
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&k| (1..=9).contains(&k));
                match var {
                    Some(k) => Ok(Expr::Var(k - 1)),
                    None => Err(Error::SymbolParse {
                        pos: at,
                        message: format!("unknown identifier '{name}'"),
                    }),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn evaluates_basic_symbols() {
        let s = Symbol::parse("1 - abs2(z)").unwrap();
        assert_abs_diff_eq!(s.eval(&[c(0.6, 0.0)]).re, 0.64, epsilon = 1e-15);
        let s = Symbol::parse("re(w)").unwrap();
        assert_eq!(s.eval(&[c(0.3, 0.7)]), c(0.3, 0.0));
        let s = Symbol::parse("z1*conj(z2) + 2*i").unwrap();
        assert_eq!(s.eval(&[c(1.0, 0.0), c(0.0, 1.0)]), c(0.0, 1.0));
        let s = Symbol::parse("clamp(1 - dist_torus(0, 1)/0.3)").unwrap();
        assert_eq!(s.eval(&[c(0.0, 0.0), c(0.0, 1.0)]), c(1.0, 0.0));
        assert_eq!(s.eval(&[c(0.0, 0.0), c(0.5, 0.0)]), c(0.0, 0.0));
        let s = Symbol::parse("max(0, 1 - dist(1)/0.5)").unwrap();
        assert_abs_diff_eq!(s.eval(&[c(0.75, 0.0)]).re, 0.5, epsilon = 1e-15);
        let s = Symbol::parse("-z^2").unwrap();
        assert_eq!(s.eval(&[c(2.0, 0.0)]), c(-4.0, 0.0));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match Symbol::parse("1 + foo(z)") {
            Err(Error::SymbolParse { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Symbol::parse("(z"), Err(Error::SymbolParse { pos: 2, .. })));
        assert!(matches!(Symbol::parse("z $"), Err(Error::SymbolParse { pos: 2, .. })));
        assert!(matches!(Symbol::parse("max(z)"), Err(Error::SymbolParse { .. })));
        assert!(matches!(Symbol::parse(""), Err(Error::SymbolParse { .. })));
    }

    #[test]
    fn polynomial_expansion() {
        let p = Symbol::parse("1 - abs2(z)").unwrap().to_polynomial(1).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.total_degree(), 2);
        let p = Symbol::parse("re(w)").unwrap().to_polynomial(1).unwrap();
        assert_eq!(p.holomorphic_degree(), 1);
        assert_eq!(p.antiholomorphic_degree(), 1);
        let p = Symbol::parse("(z1 + conj(z2))^3").unwrap().to_polynomial(2).unwrap();
        assert_eq!(p.total_degree(), 3);
        let z = [c(0.3, -0.1), c(0.2, 0.5)];
        let direct = Symbol::parse("(z1 + conj(z2))^3").unwrap().eval(&z);
        assert_abs_diff_eq!((p.eval(&z) - direct).norm(), 0.0, epsilon = 1e-15);
        assert!(Symbol::parse("abs(z)").unwrap().to_polynomial(1).is_none());
        assert!(Symbol::parse("z - z").unwrap().to_polynomial(1).unwrap().is_empty());
    }

    #[test]
    fn tags() {
        assert!(matches!(Symbol::parse("z*conj(z)").unwrap().tag(1), SymbolTag::Polynomial(_)));
        assert!(Symbol::parse("z*conj(z)").unwrap().is_radial(1));
        assert!(!Symbol::parse("re(z)").unwrap().is_radial(1));
        assert_eq!(Symbol::parse("clamp(1 - dist_torus(0, 1)/0.3)").unwrap().tag(2), SymbolTag::Radial);
        assert_eq!(Symbol::parse("abs(z - 0.5)").unwrap().tag(1), SymbolTag::General);
    }

    #[test]
    fn dimension_checks() {
        assert!(Symbol::parse("z2").unwrap().check_dim(1).is_err());
        assert!(Symbol::parse("dist(0, 1)").unwrap().check_dim(1).is_err());
        assert!(Symbol::parse("dist(0, 1)").unwrap().check_dim(2).is_ok());
    }

    #[test]
    fn sup_norm_on_disk() {
        let s = Symbol::parse("re(z)").unwrap();
        assert_abs_diff_eq!(s.sup_norm_estimate(&Domain::disk(), 64).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn product_and_conjugate() {
        let a = Symbol::parse("z").unwrap();
        let b = Symbol::parse("conj(z)").unwrap();
        let prod = Symbol::product(&[a.clone(), b.clone()]);
        assert_eq!(prod.eval(&[c(0.0, 2.0)]), c(4.0, 0.0));
        assert_eq!(a.conj().eval(&[c(0.0, 2.0)]), c(0.0, -2.0));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0f64..3.0, -3.0f64..3.0, any::<bool>())
                .prop_map(|(a, b, cplx)| Expr::Const(C64::new(a, if cplx { b } else { 0.0 }))),
            (0usize..2).prop_map(Expr::Var),
            (0.0f64..2.0, 0.0f64..2.0).prop_map(|(a, b)| Expr::DistTorus(vec![a, b])),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(Expr::neg),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| Expr::pow(a, Expr::Const(C64::new(k as f64, 0.0)))),
                inner.clone().prop_map(|a| Expr::call(Func::Conj, vec![a])),
                inner.clone().prop_map(|a| Expr::call(Func::Abs2, vec![a])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips(e in arb_expr()) {
            let text = e.to_string();
            let back = Symbol::parse(&text).unwrap();
            prop_assert_eq!(back.expr(), &e);
        }

        #[test]
        fn polynomial_expansion_agrees_with_evaluation(
            e in arb_expr(),
            a in -0.7f64..0.7, b in -0.7f64..0.7, x in -0.7f64..0.7, y in -0.7f64..0.7,
        ) {
            if let Some(p) = e.to_polynomial(2) {
                let z = [C64::new(a, b), C64::new(x, y)];
                let direct = e.eval(&z);
                let scale = 1.0 + direct.norm();
                prop_assert!((p.eval(&z) - direct).norm() <= 1e-9 * scale);
            }
        }
    }
}
