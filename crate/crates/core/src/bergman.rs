//! Truncated orthonormal bases of `A²(Ω, (-ρ)^r)`, weighted Bergman kernels,
//! normalized kernels, projections, and numerical checks of kernel identities.
//!
//! Bases are indexed by the monomials of total degree `<= N` in graded order. On
//! power-sum domains monomials are orthogonal and `e_α = z^α / √m_α`. Elsewhere the
//! monomial Gram matrix is computed by quadrature, diagonally rescaled and
//! Cholesky-factored, so `e_i` only involves monomials `j <= i` and the degree
//! filtration is kept.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::domains::{inflate, Domain, PowerSum};
use crate::error::check_dim;
use crate::multiindex::MonomialSet;
use crate::quadrature::{blocked_sums, inflation_constant, QuadratureRule, WeightedMeasure};
use crate::{Error, Result, C64};

/// Kernel values are advertised only at points with `-ρ(z) >= ACCURACY_DELTA`.
pub const ACCURACY_DELTA: f64 = 0.02;

/// Relative eigenvalue floor for the diagonally scaled Gram matrix.
pub const GRAM_EIGEN_FLOOR: f64 = 1e-12;

/// Default truncation degree by total complex dimension.
pub fn default_truncation(dim: usize) -> u32 {
    match dim {
        1 => 48,
        2 => 16,
        _ => 10,
    }
}

#[derive(Debug, Clone)]
enum Basis {
    /// `e_i = z^{α_i} · exp(-ln m_i / 2)`.
    Diagonal { ln_moments: Vec<f64> },
    /// `e_i = Σ_{j <= i} C[i][j] z^{α_j}`.
    Triangular { coeffs: DMatrix<C64>, rule: Arc<QuadratureRule> },
}

/// A truncated weighted Bergman space.
#[derive(Debug, Clone)]
pub struct WeightedSpace {
    measure: WeightedMeasure,
    monomials: MonomialSet,
    basis: Basis,
    gram_residual: f64,
    extensions: Arc<Mutex<HashMap<u32, Arc<WeightedSpace>>>>,
}

/// Orthonormal basis of degree `<= n_trunc`, in closed form when the domain has one
/// and otherwise from a default quadrature rule.
pub fn build_space(measure: &WeightedMeasure, n_trunc: u32) -> Result<Arc<WeightedSpace>> {
    if measure.has_closed_form() {
        let monomials = MonomialSet::new(measure.dim(), n_trunc);
        let ln_moments = monomials
            .iter()
            .map(|a| measure.ln_moment_closed(a).expect("closed form checked above"))
            .collect();
        return Ok(Arc::new(WeightedSpace {
            measure: measure.clone(),
            monomials,
            basis: Basis::Diagonal { ln_moments },
            gram_residual: 0.0,
            extensions: Arc::default(),
        }));
    }
    let rule = QuadratureRule::default_for(measure)?;
    build_space_with_rule(measure, n_trunc, Arc::new(rule))
}

/// Orthonormal basis from the quadrature Gram matrix of the monomials.
pub fn build_space_with_rule(
    measure: &WeightedMeasure,
    n_trunc: u32,
    rule: Arc<QuadratureRule>,
) -> Result<Arc<WeightedSpace>> {
    check_dim(measure.dim(), rule.dim())?;
    let monomials = MonomialSet::new(measure.dim(), n_trunc);
    let b = monomials.len();
    let gram = monomial_gram(&monomials, &rule);
    let d: Vec<f64> = (0..b).map(|i| gram[(i, i)].re.sqrt()).collect();
    if d.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Conditioning { smallest: 0.0, largest: 0.0 });
    }
    let scaled = DMatrix::from_fn(b, b, |i, k| gram[(i, k)] / (d[i] * d[k]));
    let eig = scaled.clone().symmetric_eigen();
    let smallest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(smallest > GRAM_EIGEN_FLOOR * largest) {
        return Err(Error::Conditioning { smallest, largest });
    }
    let chol = scaled
        .cholesky()
        .ok_or(Error::Conditioning { smallest, largest })?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(b, b))
        .ok_or(Error::Conditioning { smallest, largest })?;
    let coeffs = DMatrix::from_fn(b, b, |i, j| l_inv[(i, j)] / d[j]);
    let check = &coeffs * &gram * coeffs.adjoint();
    let gram_residual = (0..b)
        .flat_map(|i| (0..b).map(move |k| (i, k)))
        .map(|(i, k)| {
            let target = if i == k { 1.0 } else { 0.0 };
            (check[(i, k)] - target).norm()
        })
        .fold(0.0, f64::max);
    Ok(Arc::new(WeightedSpace {
        measure: measure.clone(),
        monomials,
        basis: Basis::Triangular { coeffs, rule },
        gram_residual,
        extensions: Arc::default(),
    }))
}

/// `G[i][k] = ∫ z^{α_i} conj(z^{α_k}) dμ`.
fn monomial_gram(monomials: &MonomialSet, rule: &QuadratureRule) -> DMatrix<C64> {
    let b = monomials.len();
    let flat = blocked_sums(rule, b * b, |x, w, acc| {
        let m = monomials.evaluate(x);
        for i in 0..b {
            let mi = m[i] * w;
            for k in 0..b {
                acc[i * b + k] += mi * m[k].conj();
            }
        }
    });
    DMatrix::from_fn(b, b, |i, k| flat[i * b + k])
}

impl WeightedSpace {
    pub fn measure(&self) -> &WeightedMeasure {
        &self.measure
    }

    pub fn domain(&self) -> &Domain {
        self.measure.domain()
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }

    pub fn r(&self) -> f64 {
        self.measure.r()
    }

    /// Truncation order `N`.
    pub fn n_trunc(&self) -> u32 {
        self.monomials.max_degree()
    }

    pub fn monomials(&self) -> &MonomialSet {
        &self.monomials
    }

    /// Number of basis elements.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    /// True when `e_α = z^α / √m_α`.
    pub fn is_diagonal(&self) -> bool {
        matches!(self.basis, Basis::Diagonal { .. })
    }

    /// `ln m_α` for the `i`-th monomial of a diagonal basis.
    pub fn ln_moment(&self, i: usize) -> Option<f64> {
        match &self.basis {
            Basis::Diagonal { ln_moments } => Some(ln_moments[i]),
            Basis::Triangular { .. } => None,
        }
    }

    /// Coefficient matrix `C` with `e_i = Σ_j C[i][j] z^{α_j}` (triangular bases).
    pub fn coefficients(&self) -> Option<&DMatrix<C64>> {
        match &self.basis {
            Basis::Diagonal { .. } => None,
            Basis::Triangular { coeffs, .. } => Some(coeffs),
        }
    }

    /// Quadrature rule the basis was orthogonalized with, if any.
    pub fn rule(&self) -> Option<&Arc<QuadratureRule>> {
        match &self.basis {
            Basis::Diagonal { .. } => None,
            Basis::Triangular { rule, .. } => Some(rule),
        }
    }

    /// `(e_0(z), …, e_{B-1}(z))`.
    pub fn eval_basis(&self, z: &[C64]) -> Vec<C64> {
        let m = self.monomials.evaluate(z);
        match &self.basis {
            Basis::Diagonal { ln_moments } => m
                .into_iter()
                .zip(ln_moments)
                .map(|(v, lm)| v * (-0.5 * lm).exp())
                .collect(),
            Basis::Triangular { coeffs, .. } => {
                let v = coeffs * DVector::from_vec(m);
                v.iter().copied().collect()
            }
        }
    }

    /// The same space truncated at a higher degree; its first `len()` basis
    /// elements coincide with this space's.
    pub fn extended(&self, n_trunc: u32) -> Result<Arc<WeightedSpace>> {
        if n_trunc < self.n_trunc() {
            return Err(Error::Parameter("extension must not lower the truncation".into()));
        }
        let mut cache = self.extensions.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(s) = cache.get(&n_trunc) {
            return Ok(s.clone());
        }
        let ext = match &self.basis {
            Basis::Diagonal { .. } => build_space(&self.measure, n_trunc)?,
            Basis::Triangular { rule, .. } => build_space_with_rule(&self.measure, n_trunc, rule.clone())?,
        };
        cache.insert(n_trunc, ext.clone());
        Ok(ext)
    }
}

/// Normalized kernel `k_z = K(·, z) / √K(z, z)` in basis coordinates.
#[derive(Debug, Clone)]
pub struct NormalizedKernel {
    pub point: Vec<C64>,
    /// `c_α = conj(e_α(z)) / √K(z, z)`, so `k_z = Σ_α c_α e_α`.
    pub coeffs: Vec<C64>,
    /// Truncated `K(z, z)`.
    pub diag: f64,
    /// `-ρ(z)`.
    pub depth: f64,
    /// Share of `K(z, z)` carried by the top degree shell.
    pub truncation_estimate: f64,
    /// Set when `-ρ(z)` is below the accuracy threshold.
    pub flagged: bool,
}

/// Evaluates the degree-`N` truncation of the weighted Bergman kernel.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    space: Arc<WeightedSpace>,
    delta: f64,
}

impl KernelEvaluator {
    pub fn new(space: Arc<WeightedSpace>) -> Self {
        Self {
            space,
            delta: ACCURACY_DELTA,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `K_N(z, w) = Σ_α e_α(z) conj(e_α(w))`.
    pub fn kernel(&self, z: &[C64], w: &[C64]) -> Result<C64> {
        check_dim(self.space.dim(), z.len())?;
        check_dim(self.space.dim(), w.len())?;
        let ez = self.space.eval_basis(z);
        let ew = self.space.eval_basis(w);
        Ok(ez.iter().zip(&ew).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn diag(&self, z: &[C64]) -> Result<f64> {
        check_dim(self.space.dim(), z.len())?;
        Ok(self.space.eval_basis(z).iter().map(|c| c.norm_sqr()).sum())
    }

    /// Share of `K_N(z, z)` contributed by basis elements of degree `N`.
    pub fn truncation_estimate(&self, z: &[C64]) -> Result<f64> {
        check_dim(self.space.dim(), z.len())?;
        let e = self.space.eval_basis(z);
        Ok(shell_share(&self.space, &e))
    }

    pub fn normalized_kernel(&self, z: &[C64]) -> Result<NormalizedKernel> {
        let rho = self.space.domain().rho_eval(z)?;
        let e = self.space.eval_basis(z);
        let diag: f64 = e.iter().map(|c| c.norm_sqr()).sum();
        if !(diag >= 1e-300) {
            return Err(Error::Underflow { value: diag });
        }
        let s = diag.sqrt();
        let coeffs = e.iter().map(|c| c.conj() / s).collect();
        Ok(NormalizedKernel {
            point: z.to_vec(),
            coeffs,
            diag,
            depth: -rho,
            truncation_estimate: shell_share(&self.space, &e),
            flagged: -rho < self.delta,
        })
    }
}

fn shell_share(space: &WeightedSpace, e: &[C64]) -> f64 {
    let start = space.monomials().first_of_degree(space.n_trunc());
    let total: f64 = e.iter().map(|c| c.norm_sqr()).sum();
    let top: f64 = e[start..].iter().map(|c| c.norm_sqr()).sum();
    if total > 0.0 {
        top / total
    } else {
        0.0
    }
}

/// Coefficients `⟨f, e_α⟩` of the Bergman projection of `f`, by quadrature.
pub fn project<F>(space: &WeightedSpace, f: F, rule: &QuadratureRule) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> C64,
{
    check_dim(space.dim(), rule.dim())?;
    if rule.r() != space.r() {
        return Err(Error::Parameter(format!(
            "rule was built for r = {}, space has r = {}",
            rule.r(),
            space.r()
        )));
    }
    for (i, x) in rule.nodes().enumerate() {
        let v = f(x);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numeric {
                node: i,
                message: format!("integrand is {v} at {x:?}"),
            });
        }
    }
    Ok(blocked_sums(rule, space.len(), |x, w, acc| {
        let fx = f(x) * w;
        for (a, e) in acc.iter_mut().zip(space.eval_basis(x)) {
            *a += fx * e.conj();
        }
    }))
}

/// Both sides of `K^r_Ω(z, ξ) = c_{p,r} K_{Ω^p_r}((z, 0), (ξ, 0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflationKernelCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
    pub c_pr: f64,
    /// Basis size of the unweighted space over `Ω^p_r`.
    pub inflated_len: usize,
}

fn require_depth(domain: &Domain, z: &[C64], delta: f64) -> Result<f64> {
    let rho = domain.rho_eval(z)?;
    if rho >= 0.0 {
        return Err(Error::OutsideDomain { rho });
    }
    if -rho < delta {
        return Err(Error::Precondition(format!(
            "point too close to the boundary: -rho = {:e} < {delta}",
            -rho
        )));
    }
    Ok(-rho)
}

/// Builds the unweighted space over `Ω^p_r` with the same truncation and compares
/// its kernel on `w = 0` with the weighted kernel of `base`.
pub fn inflation_kernel_check(base: &WeightedSpace, p: usize, z: &[C64], xi: &[C64]) -> Result<InflationKernelCheck> {
    let r = base.r();
    if !(r > 0.0 && r <= p as f64) {
        return Err(Error::Precondition(format!(
            "inflation needs 0 < r <= p, got r = {r}, p = {p}"
        )));
    }
    require_depth(base.domain(), z, ACCURACY_DELTA)?;
    require_depth(base.domain(), xi, ACCURACY_DELTA)?;
    let infl = inflate(base.domain(), p, r)?;
    let measure = WeightedMeasure::new(infl.domain(), 0.0)?.scaled(base.measure().scale())?;
    if !measure.has_closed_form() {
        return Err(Error::Capability(format!(
            "no closed-form moments on the inflation of {}",
            base.domain().name()
        )));
    }
    let big = build_space(&measure, base.n_trunc())?;
    let lift = |v: &[C64]| {
        let mut out = v.to_vec();
        out.extend(std::iter::repeat_n(C64::new(0.0, 0.0), p));
        out
    };
    let c_pr = inflation_constant(p, r)?;
    let lhs = KernelEvaluator::new(Arc::new(base.clone())).kernel(z, xi)?;
    let rhs = KernelEvaluator::new(big.clone()).kernel(&lift(z), &lift(xi))? * c_pr;
    Ok(InflationKernelCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm() / lhs.norm(),
        c_pr,
        inflated_len: big.len(),
    })
}

/// Both sides of the mean-value estimate
/// `|G(z, 0)|² <= (c_{p,r} (-ρ(z))^r)^{-1} ∫_{Σ|w_k|^{2p/r} < -ρ(z)} |G(z, w)|² dV(w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
}

/// `g` is evaluated at `(z, w) ∈ C^{n+p}` and must be holomorphic in `w`.
pub fn slice_inequality_check<G>(
    base: &WeightedSpace,
    p: usize,
    g: G,
    z: &[C64],
    radial: usize,
    angular: usize,
) -> Result<SliceCheck>
where
    G: Fn(&[C64]) -> C64,
{
    let r = base.r();
    if !(r > 0.0 && r <= p as f64) {
        return Err(Error::Precondition(format!(
            "the fiber estimate needs 0 < r <= p, got r = {r}, p = {p}"
        )));
    }
    let depth = require_depth(base.domain(), z, 0.0)?;
    // fiber = depth^{r/2p} × unit fiber, and dV scales by depth^r
    let a = p as f64 / r;
    let unit = Domain::new("fiber", PowerSum::new(vec![a; p], 1.0)?);
    let rule = QuadratureRule::polar_tensor(&WeightedMeasure::new(unit, 0.0)?, radial, angular)?;
    let lambda = depth.powf(r / (2.0 * p as f64));
    let mut point = z.to_vec();
    point.extend(std::iter::repeat_n(C64::new(0.0, 0.0), p));
    let lhs = g(&point).norm_sqr();
    let n = z.len();
    let integral = rule.integrate(|w| {
        let mut pt = point.clone();
        for (k, wk) in w.iter().enumerate() {
            pt[n + k] = wk * lambda;
        }
        C64::new(g(&pt).norm_sqr(), 0.0)
    })?;
    let rhs = integral.re / inflation_constant(p, r)?;
    Ok(SliceCheck { lhs, rhs, margin: rhs - lhs })
}

/// Range of `K_2(z, z) / K_1(z, z)` over sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparabilityReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Comparability constant `c` of the two weights.
    pub c: f64,
    /// Ratios lie in `[1/c, c]`.
    pub within_c: bool,
    /// Ratios lie in `[1/D, D]` with `D = c²`.
    pub within_d: bool,
    pub ratios: Vec<f64>,
}

/// Compares diagonal kernels of two spaces over the same domain whose weights
/// satisfy `μ_1 / c <= μ_2 <= c μ_1`.
pub fn diagonal_comparability_check(
    first: &KernelEvaluator,
    second: &KernelEvaluator,
    samples: &[Vec<C64>],
    c: f64,
) -> Result<ComparabilityReport> {
    let d1 = first.space().domain();
    let d2 = second.space().domain();
    check_dim(d1.dim(), d2.dim())?;
    if !(c >= 1.0) {
        return Err(Error::Parameter(format!("comparability constant must be >= 1, got {c}")));
    }
    if samples.is_empty() {
        return Err(Error::Parameter("no sample points".into()));
    }
    for z in samples {
        let (r1, r2) = (d1.rho_eval(z)?, d2.rho_eval(z)?);
        if r1 >= 0.0 || r2 >= 0.0 {
            return Err(Error::OutsideDomain { rho: r1.max(r2) });
        }
    }
    let probe = 4 * d1.dim();
    let radius = d1.bounding_radius().max(d2.bounding_radius()) * 1.2;
    for k in 0..64 {
        let z: Vec<C64> = (0..d1.dim())
            .map(|j| {
                let t = (k * probe + j) as f64;
                C64::from_polar(radius * ((t * 0.618_034).fract()), std::f64::consts::TAU * (t * 0.414_214).fract())
            })
            .collect();
        if (d1.rho(&z) < 0.0) != (d2.rho(&z) < 0.0) {
            return Err(Error::Precondition("the two spaces live on different domains".into()));
        }
    }
    let mut ratios = Vec::with_capacity(samples.len());
    for z in samples {
        ratios.push(second.diag(z)? / first.diag(z)?);
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside = |b: f64| min_ratio >= 1.0 / b && max_ratio <= b;
    Ok(ComparabilityReport {
        min_ratio,
        max_ratio,
        c,
        within_c: inside(c),
        within_d: inside(c * c),
        ratios,
    })
}

/// `∫_{Ω∖U} |k_z|² dμ` by quadrature, with `outside(w)` the indicator of `Ω∖U`.
pub fn mass_outside<F>(ev: &KernelEvaluator, z: &[C64], outside: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&[C64]) -> bool,
{
    let space = ev.space();
    check_dim(space.dim(), rule.dim())?;
    let k = ev.normalized_kernel(z)?;
    let sums = blocked_sums(rule, 1, |x, w, acc| {
        if outside(x) {
            let e = space.eval_basis(x);
            let v: C64 = e.iter().zip(&k.coeffs).map(|(a, b)| a * b).sum();
            acc[0] += C64::new(w * v.norm_sqr(), 0.0);
        }
    });
    Ok(sums[0].re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DefiningFunction;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disk_space(r: f64, n: u32) -> Arc<WeightedSpace> {
        build_space(&WeightedMeasure::new(Domain::disk(), r).unwrap(), n).unwrap()
    }

    #[test]
    fn disk_basis_matches_formula() {
        let s = disk_space(0.0, 8);
        assert!(s.gram_residual() < 1e-10);
        let z = c(0.3, -0.4);
        let e = s.eval_basis(&[z]);
        for (k, ek) in e.iter().enumerate() {
            let expected = z.powu(k as u32) * ((k as f64 + 1.0) / PI).sqrt();
            assert_abs_diff_eq!((ek - expected).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn egg_space_size() {
        let s = build_space(&WeightedMeasure::new(Domain::egg(2).unwrap(), 0.0).unwrap(), 6).unwrap();
        assert_eq!(s.len(), 28);
    }

    #[test]
    fn disk_kernels_match_closed_forms() {
        for r in [0.0, 1.0, 2.0] {
            let ev = KernelEvaluator::new(disk_space(r, 64));
            // |z w̄| <= 0.6; antipodal points of modulus 0.8 need N > 64 at r = 2
            for (z, w) in [(c(0.6, 0.4), c(0.0, 0.8)), (c(0.5, 0.3), c(-0.2, 0.6)), (c(-0.75, 0.0), c(0.75, 0.0)), (c(0.0, 0.0), c(0.0, 0.0))] {
                let exact = (r + 1.0) / PI * (C64::new(1.0, 0.0) - z * w.conj()).powf(-(r + 2.0));
                let k = ev.kernel(&[z], &[w]).unwrap();
                assert!((k - exact).norm() / exact.norm() < 1e-8, "r={r} z={z} w={w}");
            }
        }
        let ev = KernelEvaluator::new(disk_space(0.0, 10));
        assert_abs_diff_eq!(ev.kernel(&[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap().re, 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn kernel_is_hermitian_and_monotone() {
        let ev = KernelEvaluator::new(build_space(&WeightedMeasure::new(Domain::egg(2).unwrap(), 1.0).unwrap(), 10).unwrap());
        let (z, w) = ([c(0.3, 0.1), c(0.2, -0.5)], [c(-0.4, 0.2), c(0.1, 0.3)]);
        assert_eq!(ev.kernel(&z, &w).unwrap(), ev.kernel(&w, &z).unwrap().conj());
        let mut prev = 0.0;
        for n in [2, 4, 8, 16] {
            let ev = KernelEvaluator::new(build_space(&WeightedMeasure::new(Domain::egg(2).unwrap(), 1.0).unwrap(), n).unwrap());
            let d = ev.diag(&z).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn normalized_kernel_examples() {
        let ev = KernelEvaluator::new(disk_space(0.0, 48));
        let k0 = ev.normalized_kernel(&[c(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(k0.coeffs[0].re, 1.0, epsilon = 1e-15);
        assert!(k0.coeffs[1..].iter().all(|x| x.norm() == 0.0));
        let k = ev.normalized_kernel(&[c(0.7, 0.5)]).unwrap();
        let norm: f64 = k.coeffs.iter().map(|x| x.norm_sqr()).sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        assert!(!k.flagged);
        let near = ev.normalized_kernel(&[c(0.995, 0.0)]).unwrap();
        assert!(near.flagged);
        assert!(near.truncation_estimate > k.truncation_estimate);
    }

    #[test]
    fn projection_examples() {
        let space = disk_space(0.0, 8);
        let rule = QuadratureRule::default_for(space.measure()).unwrap();
        let e2 = |z: &[C64]| space.eval_basis(z)[2];
        let coeffs = project(&space, e2, &rule).unwrap();
        for (i, v) in coeffs.iter().enumerate() {
            let target = if i == 2 { 1.0 } else { 0.0 };
            assert!((v - target).norm() < 1e-10);
        }
        let zbar = project(&space, |z| z[0].conj(), &rule).unwrap();
        assert!(zbar.iter().all(|v| v.norm() < 1e-10));
        let abs2 = project(&space, |z| C64::new(z[0].norm_sqr(), 0.0), &rule).unwrap();
        // P(|z|²) = 1/2 = (√π / 2) e_0
        assert_abs_diff_eq!(abs2[0].re, PI.sqrt() / 2.0, epsilon = 1e-12);
        assert!(abs2[1..].iter().all(|v| v.norm() < 1e-10));
        // idempotence
        let f = |z: &[C64]| C64::new(z[0].re.abs(), 0.0);
        let once = project(&space, f, &rule).unwrap();
        let rebuilt = |z: &[C64]| space.eval_basis(z).iter().zip(&once).map(|(e, a)| e * a).sum::<C64>();
        let twice = project(&space, rebuilt, &rule).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn reproducing_property() {
        let space = disk_space(1.0, 20);
        let ev = KernelEvaluator::new(space.clone());
        let rule = QuadratureRule::default_for(space.measure()).unwrap();
        let z = [c(0.5, -0.6)];
        for a in [0usize, 3, 11, 20] {
            let ip = rule
                .integrate(|x| space.eval_basis(x)[a] * ev.kernel(x, &z).unwrap().conj())
                .unwrap();
            assert!((ip - space.eval_basis(&z)[a]).norm() < 1e-9);
        }
    }

    #[derive(Debug)]
    struct ShiftedDisk;

    impl DefiningFunction for ShiftedDisk {
        fn dim(&self) -> usize {
            1
        }
        fn rho(&self, z: &[C64]) -> f64 {
            (z[0] - C64::new(0.2, 0.1)).norm_sqr() - 1.0
        }
        fn bounding_radius(&self) -> f64 {
            1.3
        }
    }

    #[test]
    fn gram_basis_on_shifted_disk_reproduces_its_kernel() {
        let m = WeightedMeasure::new(Domain::new("shifted", ShiftedDisk), 0.0).unwrap();
        let space = build_space(&m, 16).unwrap();
        assert!(!space.is_diagonal());
        assert!(space.gram_residual() < 1e-10);
        let ev = KernelEvaluator::new(space);
        let a = C64::new(0.2, 0.1);
        for (z, w) in [(c(0.3, 0.2), c(0.1, -0.1)), (c(0.4, 0.4), c(0.5, 0.3))] {
            let exact = 1.0 / (PI * (C64::new(1.0, 0.0) - (z - a) * (w - a).conj()).powi(2));
            let k = ev.kernel(&[z], &[w]).unwrap();
            assert!((k - exact).norm() / exact.norm() < 1e-6, "{k} vs {exact}");
        }
    }

    #[test]
    fn gram_basis_on_closed_form_domain_agrees() {
        let m = WeightedMeasure::new(Domain::disk(), 1.0).unwrap();
        let rule = Arc::new(QuadratureRule::polar_tensor(&m, 32, 64).unwrap());
        let g = KernelEvaluator::new(build_space_with_rule(&m, 20, rule).unwrap());
        let d = KernelEvaluator::new(build_space(&m, 20).unwrap());
        let (z, w) = ([c(0.4, 0.1)], [c(-0.3, 0.5)]);
        let (a, b) = (g.kernel(&z, &w).unwrap(), d.kernel(&z, &w).unwrap());
        assert!((a - b).norm() < 1e-11 * b.norm());
    }

    #[test]
    fn coarse_quadrature_triggers_conditioning_error() {
        let m = WeightedMeasure::new(Domain::new("shifted", ShiftedDisk), 0.0).unwrap();
        let rule = Arc::new(QuadratureRule::polar_tensor(&m, 2, 3).unwrap());
        assert!(matches!(build_space_with_rule(&m, 10, rule), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn inflation_kernel_examples() {
        let s = disk_space(1.0, 48);
        let o = inflation_kernel_check(&s, 1, &[c(0.0, 0.0)], &[c(0.0, 0.0)]).unwrap();
        assert_abs_diff_eq!(o.lhs.re, 2.0 / PI, epsilon = 1e-14);
        assert!(o.residual < 1e-10);
        let o = inflation_kernel_check(&s, 1, &[c(0.5, 0.0)], &[c(0.3, 0.0)]).unwrap();
        let ball = 2.0 / (PI * PI * (1.0f64 - 0.15).powi(3));
        assert!((o.rhs.re / PI - ball).abs() / ball < 1e-8);
        assert!(o.residual < 1e-8);
        let s2 = disk_space(2.0, 32);
        let o = inflation_kernel_check(&s2, 2, &[c(0.4, 0.0)], &[c(0.4, 0.0)]).unwrap();
        assert_eq!(o.inflated_len, 6545);
        assert!(o.residual < 1e-6);
        assert!(matches!(
            inflation_kernel_check(&disk_space(0.0, 4), 1, &[c(0.0, 0.0)], &[c(0.0, 0.0)]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn slice_inequality_examples() {
        let s = disk_space(1.0, 8);
        let one = slice_inequality_check(&s, 1, |_| C64::new(1.0, 0.0), &[c(0.3, 0.0)], 16, 16).unwrap();
        assert_abs_diff_eq!(one.margin, 0.0, epsilon = 1e-10);
        let w = slice_inequality_check(&s, 1, |zw| zw[1], &[c(0.0, 0.0)], 16, 16).unwrap();
        assert_eq!(w.lhs, 0.0);
        assert!(w.margin > 0.0);
        let g = slice_inequality_check(&s, 1, |zw| C64::new(1.0, 0.0) + zw[1], &[c(0.2, 0.0)], 16, 16).unwrap();
        assert!(g.margin >= 0.0);
        let s2 = disk_space(0.5, 8);
        let g2 = slice_inequality_check(&s2, 2, |zw| C64::new(1.0, 0.0) + zw[1] * zw[2], &[c(0.2, 0.1)], 16, 8).unwrap();
        assert!(g2.margin >= -1e-12);
    }

    #[test]
    fn comparability_examples() {
        let m1 = WeightedMeasure::new(Domain::disk(), 1.0).unwrap();
        let e1 = KernelEvaluator::new(build_space(&m1, 48).unwrap());
        let pts: Vec<Vec<C64>> = (0..10).map(|k| vec![C64::from_polar(0.09 * k as f64, k as f64)]).collect();
        let same = diagonal_comparability_check(&e1, &e1, &pts, 1.0).unwrap();
        assert_eq!((same.min_ratio, same.max_ratio), (1.0, 1.0));
        let e2 = KernelEvaluator::new(build_space(&m1.clone().scaled(2.0).unwrap(), 48).unwrap());
        let half = diagonal_comparability_check(&e1, &e2, &pts, 2.0).unwrap();
        assert_abs_diff_eq!(half.min_ratio, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(half.max_ratio, 0.5, epsilon = 1e-14);
        let lin = Domain::power_sum_domain("disk", vec![1.0], 0.5).unwrap();
        let e3 = KernelEvaluator::new(build_space(&WeightedMeasure::new(lin, 1.0).unwrap(), 48).unwrap());
        let rep = diagonal_comparability_check(&e1, &e3, &pts, 2.0).unwrap();
        assert!(rep.within_c, "{rep:?}");
        let bad = diagonal_comparability_check(&e1, &KernelEvaluator::new(disk_space(1.0, 4)), &[vec![c(2.0, 0.0)]], 2.0);
        assert!(bad.is_err());
    }

    #[test]
    fn mass_concentrates_near_the_boundary_point() {
        let ev = KernelEvaluator::new(disk_space(0.0, 48));
        let rule = QuadratureRule::polar_tensor(ev.space().measure(), 128, 512).unwrap();
        let outside = |w: &[C64]| (w[0] - 1.0).norm() >= 0.3;
        let whole = mass_outside(&ev, &[c(0.99, 0.0)], |_| true, &rule).unwrap();
        assert_abs_diff_eq!(whole, 1.0, epsilon = 1e-10);
        let off = mass_outside(&ev, &[c(0.99, 0.0)], outside, &rule).unwrap();
        assert!((off - 0.036_750_447_27).abs() < 1e-3, "{off}");
    }
}
