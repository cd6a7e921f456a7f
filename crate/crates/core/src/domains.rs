//! Model pseudoconvex domains, their defining functions and Levi-form classification.
//!
//! A [`Domain`] wraps a [`DefiningFunction`]. The built-in catalog consists of
//! power-sum Reinhardt domains `{(Σ_j |z_j|^{2a_j})^q < 1}` (disk, balls, egg
//! domains, smoothed polydisks) and their Forelli–Rudin inflations
//! `Ω^p_r = {(z, w) : ρ(z) + Σ_k |w_k|^{2p/r} < 0}`. Other domains plug in by
//! implementing [`DefiningFunction`]; derivatives default to finite differences.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::check_dim;
use crate::{Error, Result, C64};

/// A real defining function `ρ` on `C^n`: negative inside, zero on the boundary,
/// positive outside.
pub trait DefiningFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn rho(&self, z: &[C64]) -> f64;

    /// Wirtinger gradient `(∂ρ/∂z_1, …, ∂ρ/∂z_n)`.
    fn grad(&self, z: &[C64]) -> Vec<C64> {
        numeric_grad(&|x: &[C64]| self.rho(x), z)
    }

    /// Matrix `H[j][k] = ∂²ρ/∂z_j∂z̄_k`.
    fn hessian(&self, z: &[C64]) -> DMatrix<C64> {
        numeric_hessian(&|x: &[C64]| self.rho(x), z)
    }

    fn is_reinhardt(&self) -> bool {
        false
    }

    /// Every point of the domain satisfies `|z_j| <= bounding_radius()` for all `j`.
    fn bounding_radius(&self) -> f64;

    /// An upper bound for `-ρ` on the domain.
    fn max_depth(&self) -> f64 {
        sampled_max_depth(self)
    }

    /// Power-sum description, when the domain has one (enables closed-form moments).
    fn power_sum(&self) -> Option<PowerSum> {
        None
    }
}

fn sampled_max_depth<D: DefiningFunction + ?Sized>(d: &D) -> f64 {
    let n = d.dim();
    let r = d.bounding_radius();
    let per_axis: usize = if n <= 2 { 9 } else { 1 };
    let total = per_axis.pow(2 * n as u32);
    let mut best = -d.rho(&vec![C64::new(0.0, 0.0); n]);
    for idx in 0..total {
        let mut rem = idx;
        let z: Vec<C64> = (0..n)
            .map(|_| {
                let a = rem % per_axis;
                rem /= per_axis;
                let b = rem % per_axis;
                rem /= per_axis;
                let h = |k: usize| -r + 2.0 * r * k as f64 / (per_axis - 1).max(1) as f64;
                C64::new(h(a), h(b))
            })
            .collect();
        best = best.max(-d.rho(&z));
    }
    best.max(0.0) * 1.1
}

/// Central-difference Wirtinger gradient.
pub fn numeric_grad(rho: &dyn Fn(&[C64]) -> f64, z: &[C64]) -> Vec<C64> {
    let scale = 1.0 + z.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let h = 1e-6 * scale;
    let mut p = z.to_vec();
    (0..z.len())
        .map(|j| {
            let base = p[j];
            p[j] = base + h;
            let fxp = rho(&p);
            p[j] = base - h;
            let fxm = rho(&p);
            p[j] = base + C64::new(0.0, h);
            let fyp = rho(&p);
            p[j] = base - C64::new(0.0, h);
            let fym = rho(&p);
            p[j] = base;
            let dx = (fxp - fxm) / (2.0 * h);
            let dy = (fyp - fym) / (2.0 * h);
            C64::new(dx, -dy) * 0.5
        })
        .collect()
}

/// Central-difference complex Hessian `∂²ρ/∂z_j∂z̄_k`.
pub fn numeric_hessian(rho: &dyn Fn(&[C64]) -> f64, z: &[C64]) -> DMatrix<C64> {
    let n = z.len();
    let scale = 1.0 + z.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let h = 1e-4 * scale;
    // real coordinates: index 2j = x_j, 2j+1 = y_j
    let shift = |p: &mut [C64], idx: usize, delta: f64| {
        if idx.is_multiple_of(2) {
            p[idx / 2].re += delta;
        } else {
            p[idx / 2].im += delta;
        }
    };
    let m = 2 * n;
    let mut real_h = DMatrix::<f64>::zeros(m, m);
    let mut p = z.to_vec();
    for a in 0..m {
        for b in a..m {
            let mut val = 0.0;
            for (sa, sb, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                shift(&mut p, a, sa * h);
                shift(&mut p, b, sb * h);
                val += sign * rho(&p);
                p.copy_from_slice(z);
            }
            val /= 4.0 * h * h;
            real_h[(a, b)] = val;
            real_h[(b, a)] = val;
        }
    }
    DMatrix::from_fn(n, n, |j, k| {
        let xx = real_h[(2 * j, 2 * k)];
        let yy = real_h[(2 * j + 1, 2 * k + 1)];
        let xy = real_h[(2 * j, 2 * k + 1)];
        let yx = real_h[(2 * j + 1, 2 * k)];
        C64::new(xx + yy, xy - yx) * 0.25
    })
}

/// `|z|^{2a}`, exact for `a = 1`.
fn abs_pow(z: C64, a: f64) -> f64 {
    let s = z.norm_sqr();
    if a == 1.0 {
        s
    } else {
        s.powf(a)
    }
}

/// `|z|^{2a-2}` with the convention `0^0 = 1`.
fn abs_pow_m1(z: C64, a: f64) -> f64 {
    if a == 1.0 {
        1.0
    } else {
        z.norm_sqr().powf(a - 1.0)
    }
}

/// `ρ(z) = (Σ_j |z_j|^{2 a_j})^q - 1` with `a_j >= 1`, `q > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSum {
    pub exponents: Vec<f64>,
    pub q: f64,
}

impl PowerSum {
    pub fn new(exponents: Vec<f64>, q: f64) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::Parameter("power-sum domain needs at least one coordinate".into()));
        }
        if exponents.iter().any(|&a| !(a.is_finite() && a >= 1.0)) {
            return Err(Error::Parameter(format!(
                "power-sum exponents must be finite and >= 1, got {exponents:?}"
            )));
        }
        if !(q.is_finite() && q > 0.0) {
            return Err(Error::Parameter(format!("outer power q must be positive, got {q}")));
        }
        Ok(Self { exponents, q })
    }

    fn sum(&self, z: &[C64]) -> f64 {
        self.exponents.iter().zip(z).map(|(&a, &zj)| abs_pow(zj, a)).sum()
    }

    /// `∂S/∂z_j = a_j |z_j|^{2a_j-2} z̄_j`.
    fn sum_grad(&self, z: &[C64]) -> Vec<C64> {
        self.exponents
            .iter()
            .zip(z)
            .map(|(&a, &zj)| zj.conj() * (a * abs_pow_m1(zj, a)))
            .collect()
    }
}

impl DefiningFunction for PowerSum {
    fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn rho(&self, z: &[C64]) -> f64 {
        let s = self.sum(z);
        if self.q == 1.0 {
            s - 1.0
        } else {
            s.powf(self.q) - 1.0
        }
    }

    fn grad(&self, z: &[C64]) -> Vec<C64> {
        let g = self.sum_grad(z);
        if self.q == 1.0 {
            return g;
        }
        let f = self.q * self.sum(z).powf(self.q - 1.0);
        g.into_iter().map(|c| c * f).collect()
    }

    fn hessian(&self, z: &[C64]) -> DMatrix<C64> {
        let n = self.dim();
        // ∂²S/∂z_j∂z̄_j = a_j² |z_j|^{2a_j-2}
        let mut h = DMatrix::<C64>::zeros(n, n);
        for (j, (&a, &zj)) in self.exponents.iter().zip(z).enumerate() {
            h[(j, j)] = C64::new(a * a * abs_pow_m1(zj, a), 0.0);
        }
        if self.q == 1.0 {
            return h;
        }
        let s = self.sum(z);
        let q = self.q;
        let g = self.sum_grad(z);
        let outer = q * (q - 1.0) * s.powf(q - 2.0);
        let inner = q * s.powf(q - 1.0);
        DMatrix::from_fn(n, n, |j, k| g[j] * g[k].conj() * outer + h[(j, k)] * inner)
    }

    fn is_reinhardt(&self) -> bool {
        true
    }

    fn bounding_radius(&self) -> f64 {
        1.0
    }

    fn max_depth(&self) -> f64 {
        1.0
    }

    fn power_sum(&self) -> Option<PowerSum> {
        Some(self.clone())
    }
}

/// A named domain backed by a defining function. Immutable and cheap to clone.
#[derive(Clone)]
pub struct Domain {
    name: String,
    shape: Arc<dyn DefiningFunction>,
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Domain")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl Domain {
    pub fn new(name: impl Into<String>, shape: impl DefiningFunction + 'static) -> Self {
        Self {
            name: name.into(),
            shape: Arc::new(shape),
        }
    }

    pub fn from_shared(name: impl Into<String>, shape: Arc<dyn DefiningFunction>) -> Self {
        Self {
            name: name.into(),
            shape,
        }
    }

    /// `{|z|² < 1}` with `ρ = |z|² - 1`.
    pub fn disk() -> Self {
        Self::new("disk", PowerSum { exponents: vec![1.0], q: 1.0 })
    }

    /// Unit ball `B^n`, `n <= 3`.
    pub fn ball(n: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Parameter(format!("ball dimension must be 1..=3, got {n}")));
        }
        Ok(Self::new(format!("ball{n}"), PowerSum::new(vec![1.0; n], 1.0)?))
    }

    /// Egg domain `{|z_1|² + |z_2|^{2m} < 1}`.
    pub fn egg(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("egg exponent m must be >= 1".into()));
        }
        Ok(Self::new(format!("egg{m}"), PowerSum::new(vec![1.0, m as f64], 1.0)?))
    }

    /// Smoothed polydisk `{|z_1|^{2m} + |z_2|^{2m} < 1}`.
    pub fn smoothed_polydisk(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::Parameter("polydisk exponent m must be >= 1".into()));
        }
        let a = m as f64;
        Ok(Self::new(format!("polydisk{m}"), PowerSum::new(vec![a, a], 1.0)?))
    }

    pub fn power_sum_domain(name: impl Into<String>, exponents: Vec<f64>, q: f64) -> Result<Self> {
        Ok(Self::new(name, PowerSum::new(exponents, q)?))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn shape(&self) -> &Arc<dyn DefiningFunction> {
        &self.shape
    }

    /// `ρ(z)` without argument checks.
    pub fn rho(&self, z: &[C64]) -> f64 {
        self.shape.rho(z)
    }

    pub fn rho_eval(&self, z: &[C64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        if z.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Parameter("point has non-finite coordinates".into()));
        }
        Ok(self.shape.rho(z))
    }

    pub fn grad_rho(&self, z: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim(), z.len())?;
        Ok(self.shape.grad(z))
    }

    pub fn hessian_matrix(&self, z: &[C64]) -> Result<DMatrix<C64>> {
        check_dim(self.dim(), z.len())?;
        Ok(self.shape.hessian(z))
    }

    /// `H_ρ(P; X, Y) = Σ_{j,k} ∂²ρ(P)/∂z_j∂z̄_k · x_j · ȳ_k`.
    pub fn complex_hessian(&self, p: &[C64], x: &[C64], y: &[C64]) -> Result<C64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        let h = self.hessian_matrix(p)?;
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..x.len() {
            for k in 0..y.len() {
                acc += h[(j, k)] * x[j] * y[k].conj();
            }
        }
        Ok(acc)
    }

    pub fn is_reinhardt(&self) -> bool {
        self.shape.is_reinhardt()
    }

    pub fn bounding_radius(&self) -> f64 {
        self.shape.bounding_radius()
    }

    pub fn max_depth(&self) -> f64 {
        self.shape.max_depth()
    }

    pub fn power_sum(&self) -> Option<PowerSum> {
        self.shape.power_sum()
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        self.rho(z) < 0.0
    }

    /// Band `|ρ(p)| < 1e-10 (1 + |p|²)` within which `p` counts as a boundary point.
    pub fn boundary_tolerance(p: &[C64]) -> f64 {
        1e-10 * (1.0 + p.iter().map(|c| c.norm_sqr()).sum::<f64>())
    }

    /// Boundary point on the ray `{t·u : t > 0}` (domains are star-shaped about 0).
    pub fn boundary_point(&self, direction: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim(), direction.len())?;
        let norm = direction.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Parameter("direction must be nonzero".into()));
        }
        let at = |t: f64| -> Vec<C64> { direction.iter().map(|&c| c * t).collect() };
        let mut lo = 0.0;
        let mut hi = 1.01 * self.bounding_radius() * (self.dim() as f64).sqrt() / norm;
        if self.rho(&at(lo)) >= 0.0 || self.rho(&at(hi)) <= 0.0 {
            return Err(Error::Precondition(
                "domain is not star-shaped about the origin along this ray".into(),
            ));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.rho(&at(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (at(lo), at(hi));
        Ok(if self.rho(&a).abs() <= self.rho(&b).abs() { a } else { b })
    }
}

/// Kind of a boundary point with respect to the Levi form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointKind {
    StronglyPseudoconvex,
    WeaklyPseudoconvex,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::StronglyPseudoconvex => "strong",
            PointKind::WeaklyPseudoconvex => "weak",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClassification {
    pub point: Vec<C64>,
    pub kind: PointKind,
    /// Smallest eigenvalue of the Levi form on the complex tangent space.
    /// `+∞` in dimension one, where the complex tangent space is trivial.
    pub min_tangential_eigenvalue: f64,
    pub tolerance_used: f64,
}

/// Default strong/weak threshold `1e-8 · (1 + max |H_jk|)`.
pub fn default_levi_tolerance(hessian: &DMatrix<C64>) -> f64 {
    1e-8 * (1.0 + hessian.iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Classifies a boundary point by the minimal eigenvalue of the complex Hessian
/// restricted to `{X : Σ_j X_j ∂ρ/∂z_j = 0}`.
pub fn classify_boundary(domain: &Domain, p: &[C64], tol: Option<f64>) -> Result<BoundaryClassification> {
    let rho = domain.rho_eval(p)?;
    let band = Domain::boundary_tolerance(p);
    if rho.abs() >= band {
        return Err(Error::NotOnBoundary { rho, tol: band });
    }
    let grad = domain.grad_rho(p)?;
    let gnorm = grad.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if !(gnorm > 1e-12) {
        return Err(Error::DegenerateGradient);
    }
    let h = domain.hessian_matrix(p)?;
    let tolerance_used = tol.unwrap_or_else(|| default_levi_tolerance(&h));
    let n = domain.dim();
    let min_eig = if n == 1 {
        f64::INFINITY
    } else {
        // unit complex normal ν = conj(∂ρ) / |∂ρ|
        let nu = DVector::from_iterator(n, grad.iter().map(|g| g.conj() / gnorm));
        let proj = DMatrix::<C64>::identity(n, n) - &nu * nu.adjoint();
        let eig = proj.symmetric_eigen();
        let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let q = DMatrix::from_fn(n, cols.len(), |i, c| eig.eigenvectors[(i, cols[c])]);
        // Levi form L(X) = Σ H_jk X_j X̄_k = X^H Hᵀ X
        let levi = h.transpose();
        let restricted = q.adjoint() * levi * &q;
        let restricted = (&restricted + restricted.adjoint()) * C64::new(0.5, 0.0);
        restricted
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let kind = if min_eig > tolerance_used {
        PointKind::StronglyPseudoconvex
    } else {
        PointKind::WeaklyPseudoconvex
    };
    Ok(BoundaryClassification {
        point: p.to_vec(),
        kind,
        min_tangential_eigenvalue: min_eig,
        tolerance_used,
    })
}

/// Forelli–Rudin inflation `Ω^p_r = {(z, w) ∈ C^n × C^p : ρ(z) + Σ_k |w_k|^{2p/r} < 0}`.
#[derive(Debug, Clone)]
pub struct InflatedDomain {
    pub base: Domain,
    pub p: usize,
    pub r: f64,
    pub total_dim: usize,
}

/// Builds `Ω^p_r`; requires `0 < r <= p` so that the fiber exponent `2p/r >= 2`.
pub fn inflate(base: &Domain, p: usize, r: f64) -> Result<InflatedDomain> {
    if p == 0 {
        return Err(Error::Parameter("inflation dimension p must be >= 1".into()));
    }
    if !(r.is_finite() && r > 0.0 && r <= p as f64) {
        return Err(Error::Parameter(format!("inflation requires 0 < r <= p, got r = {r}, p = {p}")));
    }
    Ok(InflatedDomain {
        base: base.clone(),
        p,
        r,
        total_dim: base.dim() + p,
    })
}

impl InflatedDomain {
    /// Half the fiber exponent, `p / r`.
    pub fn fiber_exponent(&self) -> f64 {
        self.p as f64 / self.r
    }

    /// `Σ_k |w_k|^{2p/r}`.
    pub fn fiber_sum(&self, w: &[C64]) -> f64 {
        let a = self.fiber_exponent();
        w.iter().map(|&c| abs_pow(c, a)).sum()
    }

    pub fn domain(&self) -> Domain {
        let name = format!("inflated({},p={},r={})", self.base.name(), self.p, self.r);
        Domain::from_shared(name, Arc::new(self.clone()))
    }
}

impl DefiningFunction for InflatedDomain {
    fn dim(&self) -> usize {
        self.total_dim
    }

    fn rho(&self, zw: &[C64]) -> f64 {
        let n = self.base.dim();
        self.base.rho(&zw[..n]) + self.fiber_sum(&zw[n..])
    }

    fn grad(&self, zw: &[C64]) -> Vec<C64> {
        let n = self.base.dim();
        let a = self.fiber_exponent();
        let mut g = self.base.shape().grad(&zw[..n]);
        g.extend(zw[n..].iter().map(|&w| w.conj() * (a * abs_pow_m1(w, a))));
        g
    }

    fn hessian(&self, zw: &[C64]) -> DMatrix<C64> {
        let n = self.base.dim();
        let a = self.fiber_exponent();
        let hb = self.base.shape().hessian(&zw[..n]);
        let mut h = DMatrix::<C64>::zeros(self.total_dim, self.total_dim);
        h.view_mut((0, 0), (n, n)).copy_from(&hb);
        for (k, &w) in zw[n..].iter().enumerate() {
            h[(n + k, n + k)] = C64::new(a * a * abs_pow_m1(w, a), 0.0);
        }
        h
    }

    fn is_reinhardt(&self) -> bool {
        self.base.is_reinhardt()
    }

    fn bounding_radius(&self) -> f64 {
        let fiber = self.base.max_depth().powf(self.r / (2.0 * self.p as f64));
        self.base.bounding_radius().max(fiber)
    }

    fn max_depth(&self) -> f64 {
        self.base.max_depth()
    }

    fn power_sum(&self) -> Option<PowerSum> {
        let base = self.base.power_sum()?;
        if base.q != 1.0 {
            return None;
        }
        let mut exponents = base.exponents;
        exponents.extend(std::iter::repeat_n(self.fiber_exponent(), self.p));
        Some(PowerSum { exponents, q: 1.0 })
    }
}

/// Outcome of sampling boundary points of `Ω^p_r` above a strongly pseudoconvex base point.
#[derive(Debug, Clone)]
pub struct InflationClassReport {
    pub samples: usize,
    pub strong: usize,
    pub strong_fraction: f64,
    pub min_tangential_eigenvalue: f64,
    /// Largest `|z - z_0|` among the sampled points.
    pub max_offset: f64,
    /// Smallest `|w_k|` among the sampled points (never zero).
    pub min_fiber_modulus: f64,
}

/// Samples boundary points `(z, w)` of the inflation with `|z - z_0| < radius` and
/// every `w_k ≠ 0`, and classifies each of them.
pub fn inflated_boundary_classification_check(
    infl: &InflatedDomain,
    z0: &[C64],
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<InflationClassReport> {
    let base_class = classify_boundary(&infl.base, z0, None)?;
    if base_class.kind != PointKind::StronglyPseudoconvex {
        return Err(Error::Precondition(
            "base point must be a strongly pseudoconvex boundary point".into(),
        ));
    }
    if !(radius > 0.0) {
        return Err(Error::Parameter("sampling radius must be positive".into()));
    }
    let dom = infl.domain();
    let n = infl.base.dim();
    let a = infl.fiber_exponent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strong = 0;
    let mut min_eig = f64::INFINITY;
    let mut max_offset: f64 = 0.0;
    let mut min_fiber = f64::INFINITY;
    let mut produced = 0;
    let mut attempts = 0usize;
    while produced < samples {
        attempts += 1;
        if attempts > 1000 * samples.max(1) {
            return Err(Error::Precondition(
                "could not sample interior base points near z0".into(),
            ));
        }
        let t = 1.0 - rng.random_range(0.01..0.5) * radius;
        let z: Vec<C64> = z0
            .iter()
            .map(|&c| {
                let m = rng.random_range(0.0..0.5) * radius / (n as f64).sqrt();
                let ph = rng.random_range(0.0..2.0 * PI);
                c * t + C64::from_polar(m, ph)
            })
            .collect();
        let offset = z.iter().zip(z0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let depth = -infl.base.rho(&z);
        if offset >= radius || depth <= 1e-12 {
            continue;
        }
        let split: Vec<f64> = (0..infl.p).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = split.iter().sum();
        let mut point = z;
        for s in split {
            let modulus = (depth * s / total).powf(1.0 / (2.0 * a));
            let ph = rng.random_range(0.0..2.0 * PI);
            min_fiber = min_fiber.min(modulus);
            point.push(C64::from_polar(modulus, ph));
        }
        let class = classify_boundary(&dom, &point, None)?;
        if class.kind == PointKind::StronglyPseudoconvex {
            strong += 1;
        }
        min_eig = min_eig.min(class.min_tangential_eigenvalue);
        max_offset = max_offset.max(offset);
        produced += 1;
    }
    Ok(InflationClassReport {
        samples,
        strong,
        strong_fraction: if samples == 0 { 1.0 } else { strong as f64 / samples as f64 },
        min_tangential_eigenvalue: min_eig,
        max_offset,
        min_fiber_modulus: min_fiber,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn rho_values_at_reference_points() {
        assert_eq!(Domain::disk().rho_eval(&[c(0.0)]).unwrap(), -1.0);
        assert_eq!(Domain::ball(2).unwrap().rho_eval(&[c(0.0), c(1.0)]).unwrap(), 0.0);
        let egg = Domain::egg(2).unwrap();
        assert_abs_diff_eq!(egg.rho_eval(&[c(0.5f64.sqrt()), c(0.0)]).unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn rho_rejects_wrong_dimension() {
        let err = Domain::disk().rho_eval(&[c(0.0), c(0.0)]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 1, found: 2 });
    }

    #[test]
    fn hessian_reference_values() {
        let disk = Domain::disk();
        let h = disk.complex_hessian(&[C64::new(0.3, -0.2)], &[c(1.0)], &[c(1.0)]).unwrap();
        assert_abs_diff_eq!(h.re, 1.0, epsilon = 1e-15);
        let egg = Domain::egg(2).unwrap();
        let h1 = egg.complex_hessian(&[c(0.0), c(1.0)], &[c(1.0), c(0.0)], &[c(1.0), c(0.0)]).unwrap();
        assert_abs_diff_eq!(h1.re, 1.0, epsilon = 1e-15);
        let h2 = egg.complex_hessian(&[c(1.0), c(0.0)], &[c(0.0), c(1.0)], &[c(0.0), c(1.0)]).unwrap();
        assert_abs_diff_eq!(h2.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let shapes = [
            PowerSum::new(vec![1.0, 2.0], 1.0).unwrap(),
            PowerSum::new(vec![4.0, 4.0], 1.0).unwrap(),
            PowerSum::new(vec![1.0, 3.0], 0.5).unwrap(),
        ];
        let z = [C64::new(0.3, 0.2), C64::new(-0.25, 0.4)];
        for s in &shapes {
            let f = |x: &[C64]| s.rho(x);
            let g = s.grad(&z);
            let gn = numeric_grad(&f, &z);
            for (a, b) in g.iter().zip(&gn) {
                assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-8);
            }
            let h = s.hessian(&z);
            let hn = numeric_hessian(&f, &z);
            assert!((h - hn).iter().all(|d| d.norm() < 1e-5));
        }
    }

    #[test]
    fn classification_examples() {
        let disk = Domain::disk();
        let k = classify_boundary(&disk, &[c(1.0)], None).unwrap();
        assert_eq!(k.kind, PointKind::StronglyPseudoconvex);

        let egg = Domain::egg(2).unwrap();
        let weak = classify_boundary(&egg, &[c(1.0), c(0.0)], None).unwrap();
        assert_eq!(weak.kind, PointKind::WeaklyPseudoconvex);
        assert_abs_diff_eq!(weak.min_tangential_eigenvalue, 0.0, epsilon = 1e-14);
        let strong = classify_boundary(&egg, &[c(0.0), c(1.0)], None).unwrap();
        assert_eq!(strong.kind, PointKind::StronglyPseudoconvex);
        assert_abs_diff_eq!(strong.min_tangential_eigenvalue, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn classification_errors() {
        let egg = Domain::egg(2).unwrap();
        assert!(matches!(
            classify_boundary(&egg, &[c(0.5), c(0.0)], None),
            Err(Error::NotOnBoundary { .. })
        ));
    }

    #[test]
    fn inflation_of_disk_is_the_ball() {
        let infl = inflate(&Domain::disk(), 1, 1.0).unwrap();
        let d = infl.domain();
        let ball = Domain::ball(2).unwrap();
        for z in [[c(0.5), c(0.5)], [C64::new(0.1, 0.7), C64::new(-0.3, 0.2)]] {
            assert_abs_diff_eq!(d.rho(&z), ball.rho(&z), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(d.rho(&[c(0.5), c(0.5)]), -0.5, epsilon = 1e-15);
        assert_eq!(infl.fiber_exponent() * 2.0, 2.0);
        assert_eq!(inflate(&Domain::disk(), 3, 3.0).unwrap().fiber_exponent(), 1.0);
        assert!(d.is_reinhardt());
    }

    #[test]
    fn inflation_parameter_errors() {
        let disk = Domain::disk();
        assert!(matches!(inflate(&disk, 1, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(inflate(&disk, 1, 1.5), Err(Error::Parameter(_))));
        assert!(matches!(inflate(&disk, 0, 0.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn inflated_power_sum_view() {
        let infl = inflate(&Domain::egg(2).unwrap(), 2, 0.5).unwrap();
        let ps = infl.power_sum().unwrap();
        assert_eq!(ps.exponents, vec![1.0, 2.0, 4.0, 4.0]);
        let linear = Domain::power_sum_domain("disk-linear", vec![1.0], 0.5).unwrap();
        assert!(inflate(&linear, 1, 1.0).unwrap().power_sum().is_none());
    }

    #[test]
    fn inflated_boundary_points_above_strong_points_are_strong() {
        let infl = inflate(&Domain::disk(), 1, 1.0).unwrap();
        let rep = inflated_boundary_classification_check(&infl, &[c(1.0)], 100, 0.05, 7).unwrap();
        assert_eq!(rep.strong_fraction, 1.0);
        assert!(rep.min_fiber_modulus > 0.0);

        let infl = inflate(&Domain::egg(2).unwrap(), 1, 1.0).unwrap();
        let rep = inflated_boundary_classification_check(&infl, &[c(0.0), c(1.0)], 100, 0.05, 7).unwrap();
        assert_eq!(rep.strong_fraction, 1.0);
        assert!(rep.max_offset < 0.05);
    }

    #[test]
    fn inflated_check_requires_strong_base_point() {
        let infl = inflate(&Domain::egg(2).unwrap(), 1, 1.0).unwrap();
        assert!(matches!(
            inflated_boundary_classification_check(&infl, &[c(1.0), c(0.0)], 10, 0.05, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn boundary_point_along_ray() {
        let egg = Domain::egg(3).unwrap();
        let p = egg.boundary_point(&[C64::new(0.3, 0.1), C64::new(0.5, -0.7)]).unwrap();
        assert!(egg.rho(&p).abs() < Domain::boundary_tolerance(&p));
    }
}
