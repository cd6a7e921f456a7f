//! Truncated Toeplitz and Hankel operators, the product decomposition, Berezin
//! transforms, boundary profiles and compactness diagnostics.
//!
//! Matrices follow `M[β][α] = ⟨T e_α, e_β⟩` and are stored by sparse columns.
//! Toeplitz blocks are computed in closed form for polynomial symbols on
//! power-sum domains, by a radial rule for radial symbols, by an angular Fourier
//! transform per radial node for other symbols on power-sum domains, and by
//! dense quadrature otherwise.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bergman::{KernelEvaluator, NormalizedKernel, WeightedSpace};
use crate::domains::Domain;
use crate::error::check_dim;
use crate::quadrature::{pairwise_sum, QuadratureRule};
use crate::symbol::{Polynomial, Symbol, SymbolTag};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Column-compressed complex matrix. Row indices within a column are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct ColSparse {
    nrows: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

impl ColSparse {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            cols: vec![Vec::new(); ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            cols: (0..n).map(|j| vec![(j, ONE)]).collect(),
        }
    }

    /// Builds from unsorted column entries; repeated rows are summed and exact
    /// zeros dropped.
    pub fn from_columns(nrows: usize, cols: Vec<Vec<(usize, C64)>>) -> Result<Self> {
        let mut out = Vec::with_capacity(cols.len());
        for mut c in cols {
            if c.iter().any(|e| e.0 >= nrows) {
                return Err(Error::Parameter("row index out of range".into()));
            }
            c.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(c.len());
            for (i, v) in c {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += v,
                    _ => merged.push((i, v)),
                }
            }
            merged.retain(|e| e.1 != ZERO);
            out.push(merged);
        }
        Ok(Self { nrows, cols: out })
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let cols = (0..m.ncols())
            .map(|j| {
                (0..m.nrows())
                    .filter_map(|i| {
                        let v = m[(i, j)];
                        (v != ZERO).then_some((i, v))
                    })
                    .collect()
            })
            .collect();
        Self { nrows: m.nrows(), cols }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.nrows, self.ncols(), ZERO);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn density(&self) -> f64 {
        let size = self.nrows * self.ncols();
        if size == 0 {
            0.0
        } else {
            self.nnz() as f64 / size as f64
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let col = &self.cols[j];
        match col.binary_search_by_key(&i, |e| e.0) {
            Ok(k) => col[k].1,
            Err(_) => ZERO,
        }
    }

    pub fn column(&self, j: usize) -> &[(usize, C64)] {
        &self.cols[j]
    }

    pub fn scale(&self, c: C64) -> Self {
        if c == ZERO {
            return Self::zeros(self.nrows, self.ncols());
        }
        Self {
            nrows: self.nrows,
            cols: self
                .cols
                .iter()
                .map(|col| col.iter().map(|&(i, v)| (i, v * c)).collect())
                .collect(),
        }
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, other: &Self, c: C64) -> Result<Self> {
        self.check_shape(other.nrows, other.ncols())?;
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len() + b.len());
                let (mut p, mut q) = (0, 0);
                while p < a.len() || q < b.len() {
                    let entry = match (a.get(p), b.get(q)) {
                        (Some(&(i, x)), Some(&(k, y))) if i == k => {
                            p += 1;
                            q += 1;
                            (i, x + c * y)
                        }
                        (Some(&(i, x)), Some(&(k, _))) if i < k => {
                            p += 1;
                            (i, x)
                        }
                        (Some(&(i, x)), None) => {
                            p += 1;
                            (i, x)
                        }
                        (_, Some(&(k, y))) => {
                            q += 1;
                            (k, c * y)
                        }
                        (None, None) => unreachable!(),
                    };
                    if entry.1 != ZERO {
                        out.push(entry);
                    }
                }
                out
            })
            .collect();
        Ok(Self { nrows: self.nrows, cols })
    }

    fn check_shape(&self, nrows: usize, ncols: usize) -> Result<()> {
        check_dim(self.nrows, nrows)?;
        check_dim(self.ncols(), ncols)
    }

    /// Matrix product. Dense factors are multiplied densely; otherwise each result
    /// column is accumulated in row order, so the result does not depend on the
    /// thread count.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dim(self.ncols(), other.nrows)?;
        if self.density() > 0.25 && other.density() > 0.25 {
            return Ok(Self::from_dense(&(self.to_dense() * other.to_dense())));
        }
        let nrows = self.nrows;
        let cols = other
            .cols
            .par_iter()
            .map(|col| {
                let mut acc = vec![ZERO; nrows];
                let mut touched = vec![false; nrows];
                for &(k, b) in col {
                    for &(i, a) in &self.cols[k] {
                        acc[i] += a * b;
                        touched[i] = true;
                    }
                }
                (0..nrows)
                    .filter(|&i| touched[i] && acc[i] != ZERO)
                    .map(|i| (i, acc[i]))
                    .collect()
            })
            .collect();
        Ok(Self { nrows, cols })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut cols: Vec<Vec<(usize, C64)>> = vec![Vec::new(); self.nrows];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                cols[i].push((j, v.conj()));
            }
        }
        Self {
            nrows: self.ncols(),
            cols,
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.ncols(), v.len())?;
        let mut out = vec![ZERO; self.nrows];
        for (col, &x) in self.cols.iter().zip(v) {
            for &(i, a) in col {
                out[i] += a * x;
            }
        }
        Ok(out)
    }

    /// Leading `rows × cols` block.
    pub fn top_left(&self, rows: usize, cols: usize) -> Self {
        Self {
            nrows: rows.min(self.nrows),
            cols: self.cols[..cols.min(self.ncols())]
                .iter()
                .map(|c| c.iter().copied().filter(|e| e.0 < rows).collect())
                .collect(),
        }
    }

    /// Columns `start..` as a matrix with the same rows.
    pub fn columns_from(&self, start: usize) -> Self {
        Self {
            nrows: self.nrows,
            cols: self.cols[start.min(self.ncols())..].to_vec(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.cols
            .iter()
            .flat_map(|c| c.iter().map(|e| e.1.norm()))
            .fold(0.0, f64::max)
    }

    /// True when every stored entry lies on the main diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.cols.iter().enumerate().all(|(j, c)| c.iter().all(|e| e.0 == j))
    }

    /// At most one entry per column and per row.
    fn is_monomial_pattern(&self) -> bool {
        let mut seen = vec![false; self.nrows];
        for c in &self.cols {
            if c.len() > 1 {
                return false;
            }
            if let Some(&(i, _)) = c.first() {
                if seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        true
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        if self.is_monomial_pattern() {
            return self.max_abs();
        }
        self.to_dense()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// `max |self − other|` over the leading `rows × cols` block.
    pub fn max_abs_diff(&self, other: &Self, rows: usize, cols: usize) -> Result<f64> {
        self.check_shape(other.nrows, other.ncols())?;
        let d = self.add_scaled(other, -ONE)?;
        Ok(d.top_left(rows, cols).max_abs())
    }
}

/// Tuning knobs for Toeplitz and Hankel matrices. `None` picks a default derived
/// from the truncation degree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorOptions {
    /// Gauss order of the radial rule (default `N/2 + 24` for the row space).
    pub radial_order: Option<usize>,
    /// Angular samples per coordinate in the Fourier path (default `max(4N + 4, 64)`).
    pub angular: Option<usize>,
    /// Extra degrees of the row space used for Hankel operators of non-polynomial
    /// symbols (default `N`).
    pub hankel_extension: Option<u32>,
}

/// Block `⟨φ e_α, e_β⟩` with `β` ranging over `rows` and `α` over its first `ncols`
/// basis elements.
pub fn toeplitz_block(rows: &WeightedSpace, ncols: usize, phi: &Symbol, opts: &OperatorOptions) -> Result<ColSparse> {
    phi.check_dim(rows.dim())?;
    if ncols > rows.len() {
        return Err(Error::Parameter("column space larger than row space".into()));
    }
    let n = rows.dim();
    if rows.is_diagonal() {
        match phi.tag(n) {
            SymbolTag::Polynomial(p) => closed_form_block(rows, ncols, &p),
            SymbolTag::Radial => radial_block(rows, ncols, phi, opts),
            SymbolTag::General => fourier_block(rows, ncols, phi, opts),
        }
    } else {
        quadrature_block(rows, ncols, phi)
    }
}

fn closed_form_block(rows: &WeightedSpace, ncols: usize, p: &Polynomial) -> Result<ColSparse> {
    let monomials = rows.monomials();
    let measure = rows.measure();
    let terms: Vec<(&Vec<u32>, &Vec<u32>, C64)> = p.terms().collect();
    let mut cols = Vec::with_capacity(ncols);
    for a in 0..ncols {
        let alpha = monomials.get(a);
        let lm_a = rows.ln_moment(a).expect("diagonal basis");
        let mut col = Vec::new();
        for &(mu, nu, c) in &terms {
            let gamma: Vec<u32> = alpha.iter().zip(mu).map(|(x, y)| x + y).collect();
            if gamma.iter().zip(nu).any(|(g, v)| g < v) {
                continue;
            }
            let beta: Vec<u32> = gamma.iter().zip(nu).map(|(g, v)| g - v).collect();
            let Some(b) = monomials.index_of(&beta) else { continue };
            let lm_g = measure
                .ln_moment_closed(&gamma)
                .ok_or_else(|| Error::Capability("closed-form moments unavailable".into()))?;
            let lm_b = rows.ln_moment(b).expect("diagonal basis");
            col.push((b, c * (lm_g - 0.5 * (lm_a + lm_b)).exp()));
        }
        cols.push(col);
    }
    ColSparse::from_columns(rows.len(), cols)
}

fn default_radial_order(rows: &WeightedSpace, opts: &OperatorOptions) -> usize {
    opts.radial_order.unwrap_or(rows.n_trunc() as usize / 2 + 24)
}

/// `Σ_j α_j ln ρ_j − ln m_α / 2` for every row basis element.
fn log_scaled_powers(rows: &WeightedSpace, moduli: &[C64]) -> Vec<f64> {
    let ln_r: Vec<f64> = moduli.iter().map(|m| m.re.ln()).collect();
    (0..rows.len())
        .map(|i| {
            let alpha = rows.monomials().get(i);
            let s: f64 = alpha
                .iter()
                .zip(&ln_r)
                .filter(|(a, _)| **a > 0)
                .map(|(&a, l)| a as f64 * l)
                .sum();
            s - 0.5 * rows.ln_moment(i).expect("diagonal basis")
        })
        .collect()
}

fn radial_block(rows: &WeightedSpace, ncols: usize, phi: &Symbol, opts: &OperatorOptions) -> Result<ColSparse> {
    let rule = QuadratureRule::radial(rows.measure(), default_radial_order(rows, opts))?;
    let nodes: Vec<(C64, Vec<f64>)> = (0..rule.len())
        .map(|k| {
            let x = rule.node(k);
            let v = phi.eval(x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric {
                    node: k,
                    message: "symbol is not finite at a quadrature node".into(),
                });
            }
            Ok((v * rule.weights()[k], log_scaled_powers(rows, x)))
        })
        .collect::<Result<_>>()?;
    let diag: Vec<C64> = (0..ncols)
        .into_par_iter()
        .map(|a| {
            let terms: Vec<C64> = nodes.iter().map(|(v, lp)| v * (2.0 * lp[a]).exp()).collect();
            pairwise_sum(&terms)
        })
        .collect();
    ColSparse::from_columns(rows.len(), diag.into_iter().enumerate().map(|(a, v)| vec![(a, v)]).collect())
}

/// Fourier coefficients `φ̂(k) = M^{-n} Σ_θ φ(θ) e^{-i k·θ}` for `k ∈ [-K, K]^n`,
/// laid out with coordinate 0 most significant.
fn fourier_coefficients(values: Vec<C64>, n: usize, m: usize, k: usize) -> Vec<C64> {
    let width = 2 * k + 1;
    let twiddle: Vec<Vec<C64>> = (0..width)
        .map(|f| {
            let freq = f as f64 - k as f64;
            (0..m)
                .map(|t| C64::from_polar(1.0 / m as f64, -2.0 * PI * freq * t as f64 / m as f64))
                .collect()
        })
        .collect();
    let mut dims = vec![m; n];
    let mut data = values;
    for axis in 0..n {
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let mut next = vec![ZERO; outer * width * inner];
        for o in 0..outer {
            for (f, tw) in twiddle.iter().enumerate() {
                for i in 0..inner {
                    let mut s = ZERO;
                    for (t, w) in tw.iter().enumerate() {
                        s += data[(o * m + t) * inner + i] * w;
                    }
                    next[(o * width + f) * inner + i] = s;
                }
            }
        }
        dims[axis] = width;
        data = next;
    }
    data
}

fn fourier_block(rows: &WeightedSpace, ncols: usize, phi: &Symbol, opts: &OperatorOptions) -> Result<ColSparse> {
    let n = rows.dim();
    let k = rows.n_trunc() as usize;
    let m = opts.angular.unwrap_or((4 * k + 4).max(64));
    if m <= 2 * k {
        return Err(Error::Parameter(format!(
            "{m} angular samples cannot resolve frequencies up to {k}"
        )));
    }
    let rule = QuadratureRule::radial(rows.measure(), default_radial_order(rows, opts))?;
    let width = 2 * k + 1;
    let grid = m.pow(n as u32);
    let nb = rows.len();
    let alphas: Vec<Vec<i64>> = (0..nb)
        .map(|i| rows.monomials().get(i).iter().map(|&a| a as i64).collect())
        .collect();
    let offset = |beta: &[i64], alpha: &[i64]| -> usize {
        beta.iter()
            .zip(alpha)
            .fold(0usize, |acc, (b, a)| acc * width + (b - a + k as i64) as usize)
    };
    let node_contribution = |node: usize| -> Result<DMatrix<C64>> {
        let moduli = rule.node(node);
        let mut values = Vec::with_capacity(grid);
        let mut point = vec![ZERO; n];
        for g in 0..grid {
            let mut rem = g;
            for j in (0..n).rev() {
                let t = rem % m;
                rem /= m;
                point[j] = C64::from_polar(moduli[j].re, 2.0 * PI * t as f64 / m as f64);
            }
            let v = phi.eval(&point);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric {
                    node,
                    message: "symbol is not finite at a quadrature node".into(),
                });
            }
            values.push(v);
        }
        let coeffs = fourier_coefficients(values, n, m, k);
        let w = rule.weights()[node];
        let lp = log_scaled_powers(rows, moduli);
        let mut out = DMatrix::from_element(nb, ncols, ZERO);
        for a in 0..ncols {
            for b in 0..nb {
                let mag = (lp[a] + lp[b]).exp();
                if mag == 0.0 {
                    continue;
                }
                out[(b, a)] = coeffs[offset(&alphas[b], &alphas[a])] * (w * mag);
            }
        }
        Ok(out)
    };
    const CHUNKS: usize = 32;
    let len = rule.len();
    let per = len.div_ceil(CHUNKS).max(1);
    let partials: Vec<DMatrix<C64>> = (0..len.div_ceil(per))
        .into_par_iter()
        .map(|c| {
            let mut acc = DMatrix::from_element(nb, ncols, ZERO);
            for node in c * per..((c + 1) * per).min(len) {
                acc += node_contribution(node)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(ColSparse::from_dense(&pairwise_matrix_sum(partials, nb, ncols)))
}

fn pairwise_matrix_sum(mut parts: Vec<DMatrix<C64>>, nrows: usize, ncols: usize) -> DMatrix<C64> {
    if parts.is_empty() {
        return DMatrix::from_element(nrows, ncols, ZERO);
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("nonempty")
}

fn quadrature_block(rows: &WeightedSpace, ncols: usize, phi: &Symbol) -> Result<ColSparse> {
    let owned;
    let rule: &QuadratureRule = match rows.rule() {
        Some(r) => r,
        None => {
            owned = QuadratureRule::default_for(rows.measure())?;
            &owned
        }
    };
    let nb = rows.len();
    const BLOCK: usize = 512;
    let len = rule.len();
    let partials: Vec<DMatrix<C64>> = (0..len.div_ceil(BLOCK))
        .into_par_iter()
        .map(|c| {
            let range = c * BLOCK..((c + 1) * BLOCK).min(len);
            let mut e = DMatrix::from_element(range.len(), nb, ZERO);
            let mut we = DMatrix::from_element(range.len(), ncols, ZERO);
            for (r, node) in range.enumerate() {
                let x = rule.node(node);
                let v = phi.eval(x);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::Numeric {
                        node,
                        message: "symbol is not finite at a quadrature node".into(),
                    });
                }
                let basis = rows.eval_basis(x);
                let scale = v * rule.weights()[node];
                for (j, b) in basis.iter().enumerate() {
                    e[(r, j)] = *b;
                    if j < ncols {
                        we[(r, j)] = b * scale;
                    }
                }
            }
            Ok(e.adjoint() * we)
        })
        .collect::<Result<_>>()?;
    Ok(ColSparse::from_dense(&pairwise_matrix_sum(partials, nb, ncols)))
}

/// Matrix of `H*_ψ H_φ` on the truncated space:
/// `⟨φ e_α, ψ e_β⟩ − ⟨P(φ e_α), P(ψ e_β)⟩`.
///
/// The projections are taken in an extended space: by the holomorphic degree of
/// the symbols when both are polynomials (which is exact), and by
/// `hankel_extension` degrees otherwise.
pub fn hankel_gram(space: &WeightedSpace, phi: &Symbol, psi: &Symbol) -> Result<ColSparse> {
    hankel_gram_with(space, phi, psi, &OperatorOptions::default())
}

pub fn hankel_gram_with(space: &WeightedSpace, phi: &Symbol, psi: &Symbol, opts: &OperatorOptions) -> Result<ColSparse> {
    let n = space.dim();
    phi.check_dim(n)?;
    psi.check_dim(n)?;
    let big_n = space.n_trunc();
    let extra = match (phi.to_polynomial(n), psi.to_polynomial(n)) {
        (Some(a), Some(b)) => a.holomorphic_degree().max(b.holomorphic_degree()),
        _ => opts.hankel_extension.unwrap_or(big_n),
    };
    let ext = space.extended(big_n + extra)?;
    let b = space.len();
    let t_phi = toeplitz_block(&ext, b, phi, opts)?;
    let t_psi = toeplitz_block(&ext, b, psi, opts)?;
    let t_prod = toeplitz_block(space, b, &psi.conj().times(phi), opts)?;
    t_prod.add_scaled(&t_psi.adjoint().mul(&t_phi)?, -ONE)
}

/// One factor of a product in an operator expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Toeplitz(Symbol),
    /// `H*_{ψ̄} H_φ`.
    HankelPair { psi: Symbol, phi: Symbol },
    Identity,
    Scalar(C64),
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Toeplitz(s) => write!(f, "T[{s}]"),
            Factor::HankelPair { psi, phi } => write!(f, "H*[conj({psi})]H[{phi}]"),
            Factor::Identity => write!(f, "I"),
            Factor::Scalar(c) => write!(f, "({:?}+{:?}i)", c.re, c.im),
        }
    }
}

/// A sum of products of factors, in the Toeplitz algebra generated by continuous
/// symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorExpr {
    terms: Vec<Vec<Factor>>,
}

impl fmt::Display for OperatorExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            for (j, factor) in term.iter().enumerate() {
                if j > 0 {
                    write!(f, "·")?;
                }
                write!(f, "{factor}")?;
            }
        }
        Ok(())
    }
}

impl OperatorExpr {
    pub fn new(terms: Vec<Vec<Factor>>) -> Result<Self> {
        if terms.is_empty() || terms.iter().any(Vec::is_empty) {
            return Err(Error::Parameter("operator expressions need nonempty sums and products".into()));
        }
        Ok(Self { terms })
    }

    pub fn factor(f: Factor) -> Self {
        Self { terms: vec![vec![f]] }
    }

    pub fn identity() -> Self {
        Self::factor(Factor::Identity)
    }

    pub fn toeplitz(phi: Symbol) -> Self {
        Self::factor(Factor::Toeplitz(phi))
    }

    pub fn terms(&self) -> &[Vec<Factor>] {
        &self.terms
    }

    pub fn plus(mut self, other: Self) -> Self {
        self.terms.extend(other.terms);
        self
    }

    /// Product `self · other`, distributed over the sums.
    pub fn times(&self, other: &Self) -> Self {
        let terms = self
            .terms
            .iter()
            .flat_map(|a| {
                other.terms.iter().map(move |b| {
                    let mut t = a.clone();
                    t.extend(b.iter().cloned());
                    t
                })
            })
            .collect();
        Self { terms }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::factor(Factor::Scalar(c)).times(self)
    }

    /// Largest symbol dimension used by any factor.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        for f in self.terms.iter().flatten() {
            match f {
                Factor::Toeplitz(s) => s.check_dim(n)?,
                Factor::HankelPair { psi, phi } => {
                    psi.check_dim(n)?;
                    phi.check_dim(n)?;
                }
                Factor::Identity | Factor::Scalar(_) => {}
            }
        }
        Ok(())
    }
}

/// Rewrites `T_{φ_m} ⋯ T_{φ_1}` (listed left to right as `[φ_m, …, φ_1]`) as
/// `T_{φ_m⋯φ_1} − Σ_{j=2}^{m} T_{φ_m} ⋯ T_{φ_{j+1}} H*_{φ̄_j} H_{φ_{j−1}⋯φ_1}`.
pub fn decompose_product(symbols: &[Symbol]) -> Result<OperatorExpr> {
    let m = symbols.len();
    if m == 0 {
        return Err(Error::Parameter("need at least one symbol".into()));
    }
    let mut terms = vec![vec![Factor::Toeplitz(Symbol::product(symbols))]];
    for j in 2..=m {
        let split = m - j;
        let mut term = vec![Factor::Scalar(-ONE)];
        term.extend(symbols[..split].iter().cloned().map(Factor::Toeplitz));
        term.push(Factor::HankelPair {
            psi: symbols[split].clone(),
            phi: Symbol::product(&symbols[split + 1..]),
        });
        terms.push(term);
    }
    OperatorExpr::new(terms)
}

/// A materialized operator on a truncated space.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    matrix: ColSparse,
    space: Arc<WeightedSpace>,
    provenance: OperatorExpr,
}

impl TruncatedOperator {
    pub fn new(matrix: ColSparse, space: Arc<WeightedSpace>, provenance: OperatorExpr) -> Result<Self> {
        matrix.check_shape(space.len(), space.len())?;
        Ok(Self {
            matrix,
            space,
            provenance,
        })
    }

    pub fn matrix(&self) -> &ColSparse {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn provenance(&self) -> &OperatorExpr {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    /// Spectral norm of the matrix.
    pub fn norm(&self) -> f64 {
        self.matrix.spectral_norm()
    }

    /// `max |M − M^H|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.len();
        self.matrix
            .max_abs_diff(&self.matrix.adjoint(), n, n)
            .expect("square matrix")
    }
}

/// `T_φ` on the truncated space.
pub fn toeplitz(space: &Arc<WeightedSpace>, phi: &Symbol) -> Result<TruncatedOperator> {
    toeplitz_with(space, phi, &OperatorOptions::default())
}

pub fn toeplitz_with(space: &Arc<WeightedSpace>, phi: &Symbol, opts: &OperatorOptions) -> Result<TruncatedOperator> {
    let matrix = toeplitz_block(space, space.len(), phi, opts)?;
    TruncatedOperator::new(matrix, space.clone(), OperatorExpr::toeplitz(phi.clone()))
}

/// Sums and multiplies the factor matrices in order. Repeated factors are
/// computed once.
pub fn materialize(expr: &OperatorExpr, space: &Arc<WeightedSpace>) -> Result<TruncatedOperator> {
    materialize_with(expr, space, &OperatorOptions::default())
}

pub fn materialize_with(expr: &OperatorExpr, space: &Arc<WeightedSpace>, opts: &OperatorOptions) -> Result<TruncatedOperator> {
    expr.check_dim(space.dim())?;
    let b = space.len();
    let mut cache: HashMap<String, ColSparse> = HashMap::new();
    let mut total = ColSparse::zeros(b, b);
    for term in expr.terms() {
        let mut scalar = ONE;
        let mut product: Option<ColSparse> = None;
        for factor in term {
            let m = match factor {
                Factor::Scalar(c) => {
                    scalar *= c;
                    continue;
                }
                Factor::Identity => continue,
                Factor::Toeplitz(s) => {
                    let key = format!("T {s}");
                    if !cache.contains_key(&key) {
                        cache.insert(key.clone(), toeplitz_block(space, b, s, opts)?);
                    }
                    cache[&key].clone()
                }
                Factor::HankelPair { psi, phi } => {
                    let key = format!("H {psi} ; {phi}");
                    if !cache.contains_key(&key) {
                        cache.insert(key.clone(), hankel_gram_with(space, phi, &psi.conj(), opts)?);
                    }
                    cache[&key].clone()
                }
            };
            product = Some(match product {
                None => m,
                Some(p) => p.mul(&m)?,
            });
        }
        let product = product.unwrap_or_else(|| ColSparse::identity(b));
        total = total.add_scaled(&product, scalar)?;
    }
    TruncatedOperator::new(total, space.clone(), expr.clone())
}

fn polynomial_degree(space: &WeightedSpace, s: &Symbol) -> Result<u32> {
    s.to_polynomial(space.dim())
        .map(|p| p.total_degree())
        .ok_or_else(|| Error::Precondition(format!("symbol {s} is not a polynomial in z and z̄")))
}

fn safe_block(space: &WeightedSpace, margin: u32) -> usize {
    match space.n_trunc().checked_sub(margin) {
        Some(d) => space.monomials().count_up_to(d),
        None => 0,
    }
}

/// Max-entry residual of `T_{φ2} T_{φ1} = T_{φ2 φ1} − H*_{φ̄2} H_{φ1}` over indices of
/// degree `<= N − margin`.
pub fn semi_commutator_residual(space: &Arc<WeightedSpace>, phi2: &Symbol, phi1: &Symbol, margin: u32) -> Result<f64> {
    let d = polynomial_degree(space, phi2)?.max(polynomial_degree(space, phi1)?);
    if margin < d {
        return Err(Error::Parameter(format!("margin {margin} is below the symbol degree {d}")));
    }
    let b = space.len();
    let opts = OperatorOptions::default();
    let lhs = toeplitz_block(space, b, phi2, &opts)?.mul(&toeplitz_block(space, b, phi1, &opts)?)?;
    let rhs = toeplitz_block(space, b, &phi2.times(phi1), &opts)?
        .add_scaled(&hankel_gram_with(space, phi1, &phi2.conj(), &opts)?, -ONE)?;
    let k = safe_block(space, margin);
    lhs.max_abs_diff(&rhs, k, k)
}

/// Max-entry difference between `materialize(decompose_product(symbols))` and the
/// direct product of Toeplitz matrices over indices of degree `<= N − margin`.
/// The margin must cover the sum of the symbol degrees.
pub fn decomposition_residual(space: &Arc<WeightedSpace>, symbols: &[Symbol], margin: u32) -> Result<f64> {
    let mut d = 0;
    for s in symbols {
        d += polynomial_degree(space, s)?;
    }
    if margin < d {
        return Err(Error::Parameter(format!("margin {margin} is below the total degree {d}")));
    }
    let decomposed = materialize(&decompose_product(symbols)?, space)?;
    let direct = symbols
        .iter()
        .map(|s| OperatorExpr::toeplitz(s.clone()))
        .reduce(|a, b| a.times(&b))
        .ok_or_else(|| Error::Parameter("need at least one symbol".into()))?;
    let direct = materialize(&direct, space)?;
    let k = safe_block(space, margin);
    decomposed.matrix().max_abs_diff(direct.matrix(), k, k)
}

/// `B T(z) = ⟨T k_z, k_z⟩`.
pub fn berezin(op: &TruncatedOperator, z: &[C64]) -> Result<C64> {
    let nk = KernelEvaluator::new(op.space().clone()).normalized_kernel(z)?;
    berezin_at(op, &nk)
}

/// Berezin transform at a precomputed normalized kernel.
pub fn berezin_at(op: &TruncatedOperator, nk: &NormalizedKernel) -> Result<C64> {
    let v = op.matrix().mul_vec(&nk.coeffs)?;
    let terms: Vec<C64> = nk.coeffs.iter().zip(&v).map(|(c, x)| c.conj() * x).collect();
    Ok(pairwise_sum(&terms))
}

/// One sample of a boundary profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSample {
    pub t: f64,
    pub value: C64,
    /// Share of the kernel diagonal in the top degree shell.
    pub truncation_estimate: f64,
    /// Set when the sample lies inside the accuracy band near the boundary.
    pub flagged: bool,
}

/// Berezin transform along the inward radial path `z(t) = t·p0`.
pub fn boundary_profile(op: &TruncatedOperator, p0: &[C64], t_grid: &[f64]) -> Result<Vec<ProfileSample>> {
    let domain = op.space().domain();
    let rho = domain.rho_eval(p0)?;
    let tol = Domain::boundary_tolerance(p0);
    if rho.abs() >= tol {
        return Err(Error::NotOnBoundary { rho, tol });
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Parameter(format!("profile parameter {t} is outside (0, 1)")));
    }
    let ev = KernelEvaluator::new(op.space().clone());
    t_grid
        .par_iter()
        .map(|&t| {
            let z: Vec<C64> = p0.iter().map(|c| c * t).collect();
            let nk = ev.normalized_kernel(&z)?;
            Ok(ProfileSample {
                t,
                value: berezin_at(op, &nk)?,
                truncation_estimate: nk.truncation_estimate,
                flagged: nk.flagged,
            })
        })
        .collect()
}

/// Spectral norm of the operator restricted to basis elements of degree `>= k`.
pub fn tail_norm(op: &TruncatedOperator, k: u32) -> Result<f64> {
    let n = op.space().n_trunc();
    if k > n {
        return Err(Error::Parameter(format!("tail degree {k} exceeds the truncation {n}")));
    }
    let start = op.space().monomials().first_of_degree(k);
    Ok(op.matrix().columns_from(start).spectral_norm())
}

/// `k ↦ tail_norm(k)` for `k = 0, …, N`.
pub fn tail_curve(op: &TruncatedOperator) -> Result<Vec<(u32, f64)>> {
    (0..=op.space().n_trunc())
        .into_par_iter()
        .map(|k| Ok((k, tail_norm(op, k)?)))
        .collect()
}

/// Twenty evenly spaced values from 0.5 to 0.98.
pub fn default_t_grid() -> Vec<f64> {
    (0..20).map(|k| 0.5 + 0.48 * k as f64 / 19.0).collect()
}

/// Thresholds for the compactness report.
#[derive(Debug, Clone, PartialEq)]
pub struct AzConfig {
    pub t_grid: Vec<f64>,
    /// A profile vanishes when its terminal modulus is below this value.
    pub vanish_threshold: f64,
    /// The tail is nonvanishing when `tail_norm(N/2)` exceeds this value.
    pub tail_threshold: f64,
    /// Number of trailing grid points on which the profile modulus must decrease.
    pub window: usize,
}

impl Default for AzConfig {
    fn default() -> Self {
        Self {
            t_grid: default_t_grid(),
            vanish_threshold: 0.1,
            tail_threshold: 0.5,
            window: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointProfile {
    pub point: Vec<C64>,
    pub samples: Vec<ProfileSample>,
    /// `|B T|` at the last grid point.
    pub terminal: f64,
    /// `|B T|` is nonincreasing over the trailing window.
    pub decreasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

/// Compares Berezin decay at strongly pseudoconvex points with tail-norm decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AzReport {
    pub strong: Vec<PointProfile>,
    pub weak: Vec<PointProfile>,
    /// Largest terminal `|B T|` over strong points.
    pub strong_sup: f64,
    /// Largest terminal `|B T|` over weak points (0 without weak points).
    pub weak_sup: f64,
    pub strong_vanishing: bool,
    pub weak_nonvanishing: bool,
    pub tail: Vec<(u32, f64)>,
    pub tail_at_half: f64,
    pub tail_nonvanishing: bool,
    pub verdict: Verdict,
    pub interpretation: String,
}

fn point_profile(op: &TruncatedOperator, p: &[C64], cfg: &AzConfig) -> Result<PointProfile> {
    let samples = boundary_profile(op, p, &cfg.t_grid)?;
    let mods: Vec<f64> = samples.iter().map(|s| s.value.norm()).collect();
    let window = cfg.window.min(mods.len());
    let tail = &mods[mods.len() - window..];
    Ok(PointProfile {
        point: p.to_vec(),
        terminal: mods.last().copied().unwrap_or(0.0),
        decreasing: tail.windows(2).all(|w| w[1] <= w[0]),
        samples,
    })
}

pub fn axler_zheng_report(
    expr: &OperatorExpr,
    space: &Arc<WeightedSpace>,
    strong_points: &[Vec<C64>],
    weak_points: &[Vec<C64>],
    cfg: &AzConfig,
) -> Result<AzReport> {
    if strong_points.is_empty() {
        return Err(Error::Parameter("no strongly pseudoconvex points supplied".into()));
    }
    if cfg.t_grid.is_empty() {
        return Err(Error::Parameter("empty profile grid".into()));
    }
    let op = materialize(expr, space)?;
    report_for(&op, strong_points, weak_points, cfg)
}

/// The compactness report for an already materialized operator.
pub fn report_for(
    op: &TruncatedOperator,
    strong_points: &[Vec<C64>],
    weak_points: &[Vec<C64>],
    cfg: &AzConfig,
) -> Result<AzReport> {
    if strong_points.is_empty() {
        return Err(Error::Parameter("no strongly pseudoconvex points supplied".into()));
    }
    let strong = strong_points
        .iter()
        .map(|p| point_profile(op, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let weak = weak_points
        .iter()
        .map(|p| point_profile(op, p, cfg))
        .collect::<Result<Vec<_>>>()?;
    let strong_sup = strong.iter().map(|p| p.terminal).fold(0.0, f64::max);
    let weak_sup = weak.iter().map(|p| p.terminal).fold(0.0, f64::max);
    let strong_vanishing = strong
        .iter()
        .all(|p| p.terminal < cfg.vanish_threshold && p.decreasing);
    let weak_nonvanishing = weak.iter().any(|p| p.terminal >= cfg.vanish_threshold);
    let tail = tail_curve(op)?;
    let tail_at_half = tail_norm(op, op.space().n_trunc() / 2)?;
    let tail_nonvanishing = tail_at_half > cfg.tail_threshold;
    let (verdict, interpretation) = match (strong_vanishing, tail_nonvanishing, weak_nonvanishing) {
        (true, false, _) => (Verdict::Consistent, "compact: Berezin transform and tail norms both decay"),
        (false, true, _) => (Verdict::Consistent, "noncompact: Berezin transform and tail norms both persist"),
        (true, true, true) => (
            Verdict::Consistent,
            "localized: Berezin decay at strongly pseudoconvex points, mass persists at weakly pseudoconvex points",
        ),
        (true, true, false) => (
            Verdict::Inconsistent,
            "tail norms persist although the Berezin transform decays at every sampled point",
        ),
        (false, false, _) => (
            Verdict::Inconsistent,
            "tail norms decay although the Berezin transform persists at strongly pseudoconvex points",
        ),
    };
    Ok(AzReport {
        strong,
        weak,
        strong_sup,
        weak_sup,
        strong_vanishing,
        weak_nonvanishing,
        tail,
        tail_at_half,
        tail_nonvanishing,
        verdict,
        interpretation: interpretation.to_string(),
    })
}
