//! Weighted measures `(-ρ)^r dV`, quadrature rules, monomial moments and the
//! inflation constant `c_{p,r}`.
//!
//! Rules carry the full measure weight: `integrate` returns `Σ_i w_i f(x_i)` where
//! `w_i` already contains `(-ρ(x_i))^r`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domains::{Domain, PowerSum};
use crate::error::check_dim;
use crate::gauss::JacobiRule;
use crate::special::{ln_gamma, ln_power_sum_moment};
use crate::{Error, Result, C64};

/// The measure `(-ρ)^r dV` on a domain.
#[derive(Debug, Clone)]
pub struct WeightedMeasure {
    domain: Domain,
    r: f64,
    scale: f64,
}

impl WeightedMeasure {
    pub fn new(domain: Domain, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Parameter(format!("weight exponent r must be >= 0, got {r}")));
        }
        Ok(Self { domain, r, scale: 1.0 })
    }

    /// The measure `c · (-ρ)^r dV` for a constant `c > 0`.
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Parameter(format!("measure scale must be positive, got {c}")));
        }
        self.scale *= c;
        Ok(self)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `(-ρ(z))^r`, with `r = 0` giving 1 everywhere (no `0^0` at the boundary).
    pub fn weight(&self, z: &[C64]) -> f64 {
        self.scale * weight_from_depth(-self.domain.rho(z), self.r)
    }

    /// Moments have a closed form on power-sum domains.
    pub fn has_closed_form(&self) -> bool {
        self.domain.power_sum().is_some()
    }

    /// `ln ∫ |z^α|² (-ρ)^r dV` in closed form, when available.
    pub fn ln_moment_closed(&self, alpha: &[u32]) -> Option<f64> {
        let ps = self.domain.power_sum()?;
        Some(ln_power_sum_moment(&ps.exponents, ps.q, alpha, self.r) + self.scale.ln())
    }
}

fn weight_from_depth(depth: f64, r: f64) -> f64 {
    if r == 0.0 {
        1.0
    } else if depth <= 0.0 {
        0.0
    } else if r == 1.0 {
        depth
    } else {
        depth.powf(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Gauss–Jacobi in Dirichlet coordinates `t_j = |z_j|^{2a_j}` times equispaced angles.
    PolarTensor,
    /// Same radial nodes without angles; only valid for integrands depending on `|z_j|`.
    Radial2D,
    MonteCarlo,
}

/// How to build a rule for a measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureSpec {
    Default,
    PolarTensor { radial: usize, angular: usize },
    Radial { radial: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DEFAULT_MC_SEED: u64 = 42;

/// Nodes strictly inside the domain with positive weights (measure weight included).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub scheme: Scheme,
    dim: usize,
    r: f64,
    nodes: Vec<C64>,
    weights: Vec<f64>,
    pub radial_order: usize,
    pub angular_order: usize,
    pub samples: usize,
    pub seed: Option<u64>,
}

impl QuadratureRule {
    pub fn build(measure: &WeightedMeasure, spec: QuadratureSpec) -> Result<Self> {
        match spec {
            QuadratureSpec::Default => Self::default_for(measure),
            QuadratureSpec::PolarTensor { radial, angular } => Self::polar_tensor(measure, radial, angular),
            QuadratureSpec::Radial { radial } => Self::radial(measure, radial),
            QuadratureSpec::MonteCarlo { samples, seed } => Self::monte_carlo(measure, samples, seed),
        }
    }

    /// Per-dimension defaults: 128×128 in one variable, 24×24 per coordinate in
    /// two, Monte Carlo beyond that.
    pub fn default_for(measure: &WeightedMeasure) -> Result<Self> {
        match measure.dim() {
            1 => Self::polar_tensor(measure, 128, 128),
            2 if measure.has_closed_form() => Self::polar_tensor(measure, 24, 24),
            _ => Self::monte_carlo(measure, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED),
        }
    }

    /// Tensor rule. Power-sum domains use Dirichlet coordinates; other planar
    /// domains use a star-shaped polar rule about the origin.
    pub fn polar_tensor(measure: &WeightedMeasure, radial: usize, angular: usize) -> Result<Self> {
        if radial == 0 || angular == 0 {
            return Err(Error::Parameter("quadrature orders must be positive".into()));
        }
        let n = measure.dim();
        let (nodes, weights) = match measure.domain().power_sum() {
            Some(ps) => {
                let count = radial.checked_pow(n as u32).and_then(|a| a.checked_mul(angular.checked_pow(n as u32)?));
                if count.is_none_or(|c| c > 50_000_000) {
                    return Err(Error::Parameter(format!(
                        "polar tensor rule with {radial}x{angular} nodes per coordinate is too large in dimension {n}"
                    )));
                }
                let radial_nodes = dirichlet_nodes(&ps, radial, measure.r(), false);
                let step = 2.0 * PI / angular as f64;
                let phases: Vec<C64> = (0..angular).map(|k| C64::from_polar(1.0, step * k as f64)).collect();
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                let ang_w = step.powi(n as i32) * measure.scale();
                for (moduli, w) in &radial_nodes {
                    for idx in 0..angular.pow(n as u32) {
                        let mut rem = idx;
                        for m in moduli {
                            nodes.push(phases[rem % angular] * *m);
                            rem /= angular;
                        }
                        weights.push(w * ang_w);
                    }
                }
                (nodes, weights)
            }
            None if n == 1 => star_polar_nodes(measure, radial, angular)?,
            None => {
                return Err(Error::Capability(
                    "polar tensor rules need a power-sum domain or a planar domain".into(),
                ))
            }
        };
        Ok(Self {
            scheme: Scheme::PolarTensor,
            dim: n,
            r: measure.r(),
            nodes,
            weights,
            radial_order: radial,
            angular_order: angular,
            samples: 0,
            seed: None,
        })
    }

    /// Rule for integrands depending only on `(|z_1|, …, |z_n|)` on power-sum
    /// domains. Nodes have zero phase. Integrands smooth in the moduli (not only in
    /// their squares) converge spectrally.
    pub fn radial(measure: &WeightedMeasure, radial: usize) -> Result<Self> {
        if radial == 0 {
            return Err(Error::Parameter("quadrature orders must be positive".into()));
        }
        let ps = measure
            .domain()
            .power_sum()
            .ok_or_else(|| Error::Capability("radial rules need a power-sum domain".into()))?;
        let n = measure.dim();
        let full_turns = (2.0 * PI).powi(n as i32) * measure.scale();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (moduli, w) in dirichlet_nodes(&ps, radial, measure.r(), true) {
            nodes.extend(moduli.iter().map(|&m| C64::new(m, 0.0)));
            weights.push(w * full_turns);
        }
        Ok(Self {
            scheme: Scheme::Radial2D,
            dim: n,
            r: measure.r(),
            nodes,
            weights,
            radial_order: radial,
            angular_order: 0,
            samples: 0,
            seed: None,
        })
    }

    /// Rejection sampling in the box `[-R, R]^{2n}`, `R` the bounding radius.
    pub fn monte_carlo(measure: &WeightedMeasure, samples: usize, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Parameter("Monte Carlo needs at least one sample".into()));
        }
        let n = measure.dim();
        let radius = measure.domain().bounding_radius();
        let cell = (2.0 * radius).powi(2 * n as i32) / samples as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = vec![C64::new(0.0, 0.0); n];
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for _ in 0..samples {
            for c in z.iter_mut() {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                *c = C64::new(radius * (2.0 * x - 1.0), radius * (2.0 * y - 1.0));
            }
            let depth = -measure.domain().rho(&z);
            if depth > 0.0 {
                nodes.extend_from_slice(&z);
                weights.push(cell * measure.scale() * weight_from_depth(depth, measure.r()));
            }
        }
        Ok(Self {
            scheme: Scheme::MonteCarlo,
            dim: n,
            r: measure.r(),
            nodes,
            weights,
            radial_order: 0,
            angular_order: 0,
            samples,
            seed: Some(seed),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[C64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[C64]> {
        self.nodes.chunks_exact(self.dim.max(1))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_i w_i f(x_i)`, pairwise-summed; fails on the first non-finite value.
    pub fn integrate<F>(&self, f: F) -> Result<C64>
    where
        F: Fn(&[C64]) -> C64,
    {
        let mut terms = Vec::with_capacity(self.len());
        for (i, (x, &w)) in self.nodes().zip(&self.weights).enumerate() {
            let v = f(x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric {
                    node: i,
                    message: format!("integrand is {v} at {x:?}"),
                });
            }
            terms.push(v * w);
        }
        Ok(pairwise_sum(&terms))
    }
}

/// Radial nodes in Dirichlet coordinates `t_j = |z_j|^{2a_j}`, `t = s·y` with `y`
/// stick-broken into `u_1, …, u_{n-1}`. Returns the moduli `|z_j|` and the weight
/// `Π_j 1/(2a_j) × (Jacobi weights) × (-ρ)^r` of each node, excluding angles.
///
/// Powers `t_j^{k/a_j}` are fractional when `a_j > 1`. With `L = lcm(a_j)` the
/// substitution `s = σ^κ` (`κ` a multiple of `L` with `κq` integral) makes the
/// radial factor polynomial in `σ` and turns `(1 - s^q)^r` into `(1 - σ)^r` times a
/// smooth factor; each `u` level is split at 1/2 and substituted `u = x^L / 2`,
/// `1 - u = x^L / 2` on the two halves. With `smooth_moduli` the same is done with
/// `2L`, which suits integrands in `|z_j|` rather than `|z_j|²`.
fn dirichlet_nodes(ps: &PowerSum, order: usize, r: f64, smooth_moduli: bool) -> Vec<(Vec<f64>, f64)> {
    let a = &ps.exponents;
    let n = a.len();
    let q = ps.q;
    let c: Vec<f64> = a.iter().map(|x| 1.0 / x).collect();
    let total: f64 = c.iter().sum();
    let is_int = |x: f64| (x - x.round()).abs() < 1e-12 && x.round() >= 1.0;
    // Doubling keeps the moduli |z_j| = t_j^{1/(2a_j)} smooth in the new variables.
    let lcm = if smooth_moduli { 2.0 } else { 1.0 }
        * if a.iter().all(|&x| is_int(x) && x <= 64.0) {
        a.iter().fold(1u64, |acc, &x| {
            let x = x.round() as u64;
            let (mut g, mut h) = (acc, x);
            while h != 0 {
                (g, h) = (h, g % h);
            }
            acc / g * x
        }) as f64
    } else {
        1.0
    };
    let kappa = (1..=16).map(|m| lcm * m as f64).find(|&k| is_int(k * q));

    // s level
    let (kap, absorbed) = match kappa {
        Some(k) => (k, true),
        None => (lcm, false),
    };
    let s_rule = JacobiRule::new(order, if absorbed { r } else { 0.0 }, kap * total - 1.0);
    let kq = (kap * q).round();
    let s_level: Vec<(f64, f64)> = s_rule
        .nodes
        .iter()
        .zip(&s_rule.weights)
        .map(|(&sigma, &w)| {
            let s = sigma.powf(kap);
            let extra = if absorbed {
                // (1 - σ^{κq}) / (1 - σ) = 1 + σ + … + σ^{κq-1}
                let geom: f64 = (0..kq as i32).map(|i| sigma.powi(i)).sum();
                weight_from_depth(geom, r)
            } else {
                weight_from_depth(1.0 - s.powf(q), r)
            };
            (s, kap * w * extra)
        })
        .collect();

    // u levels with weight u^{c_j - 1} (1 - u)^{C_{>j} - 1}
    let u_levels: Vec<Vec<(f64, f64)>> = (0..n.saturating_sub(1))
        .map(|j| {
            let lo_exp = c[j];
            let hi_exp: f64 = c[j + 1..].iter().sum();
            let mut nodes = Vec::with_capacity(2 * order);
            let left = JacobiRule::new(order, 0.0, lcm * lo_exp - 1.0);
            for (&x, &w) in left.nodes.iter().zip(&left.weights) {
                let u = 0.5 * x.powf(lcm);
                let wt = lcm * 0.5f64.powf(lo_exp) * w * (1.0 - u).powf(hi_exp - 1.0);
                nodes.push((u, wt));
            }
            let right = JacobiRule::new(order, 0.0, lcm * hi_exp - 1.0);
            for (&x, &w) in right.nodes.iter().zip(&right.weights).rev() {
                let v = 0.5 * x.powf(lcm);
                let wt = lcm * 0.5f64.powf(hi_exp) * w * (1.0 - v).powf(lo_exp - 1.0);
                nodes.push((1.0 - v, wt));
            }
            nodes
        })
        .collect();

    let scale: f64 = a.iter().map(|x| 0.5 / x).product();
    let total_nodes = s_level.len() * u_levels.iter().map(Vec::len).product::<usize>();
    let mut out = Vec::with_capacity(total_nodes);
    let mut t = vec![0.0; n];
    for idx in 0..total_nodes {
        let mut rem = idx;
        let (s, ws) = s_level[rem % s_level.len()];
        rem /= s_level.len();
        let mut w = scale * ws;
        let mut stick = s;
        for (j, level) in u_levels.iter().enumerate() {
            let (u, wu) = level[rem % level.len()];
            rem /= level.len();
            t[j] = stick * u;
            stick *= 1.0 - u;
            w *= wu;
        }
        t[n - 1] = stick;
        let moduli = t.iter().zip(a).map(|(&tj, &aj)| tj.powf(0.5 / aj)).collect();
        out.push((moduli, w));
    }
    out
}

/// Polar rule on a planar domain star-shaped about 0: `z = R(θ) u e^{iθ}` with
/// `dA = R(θ)² u du dθ`.
fn star_polar_nodes(measure: &WeightedMeasure, radial: usize, angular: usize) -> Result<(Vec<C64>, Vec<f64>)> {
    let dom = measure.domain();
    let jac = JacobiRule::new(radial, 0.0, 1.0);
    let step = 2.0 * PI / angular as f64;
    let mut nodes = Vec::with_capacity(radial * angular);
    let mut weights = Vec::with_capacity(radial * angular);
    for k in 0..angular {
        let dir = C64::from_polar(1.0, step * k as f64);
        let edge = dom.boundary_point(&[dir])?[0].norm();
        for (&u, &wu) in jac.nodes.iter().zip(&jac.weights) {
            let z = dir * (edge * u);
            let w = edge * edge * wu * step * measure.weight(&[z]);
            if w > 0.0 {
                nodes.push(z);
                weights.push(w);
            }
        }
    }
    Ok((nodes, weights))
}

/// Accumulates `len` sums over the nodes of a rule: nodes are processed in fixed
/// blocks, each block summed sequentially, and block totals combined pairwise.
/// `f(x, w, acc)` adds node contributions into `acc`.
pub fn blocked_sums<F>(rule: &QuadratureRule, len: usize, f: F) -> Vec<C64>
where
    F: Fn(&[C64], f64, &mut [C64]),
{
    const BLOCK: usize = 512;
    let mut partials: Vec<Vec<C64>> = Vec::new();
    let mut acc = vec![C64::new(0.0, 0.0); len];
    for (i, (x, &w)) in rule.nodes().zip(rule.weights()).enumerate() {
        f(x, w, &mut acc);
        if (i + 1) % BLOCK == 0 {
            partials.push(std::mem::replace(&mut acc, vec![C64::new(0.0, 0.0); len]));
        }
    }
    partials.push(acc);
    (0..len)
        .map(|k| {
            let column: Vec<C64> = partials.iter().map(|p| p[k]).collect();
            pairwise_sum(&column)
        })
        .collect()
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(xs: &[C64]) -> C64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise summation of reals.
pub fn pairwise_sum_real(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_real(&xs[..mid]) + pairwise_sum_real(&xs[mid..])
}

/// `∫ f (-ρ)^r dV` with a rule built for `measure`.
pub fn integrate<F>(f: F, measure: &WeightedMeasure, rule: &QuadratureRule) -> Result<C64>
where
    F: Fn(&[C64]) -> C64,
{
    check_dim(measure.dim(), rule.dim())?;
    if measure.r() != rule.r() {
        return Err(Error::Parameter(format!(
            "rule was built for r = {}, measure has r = {}",
            rule.r(),
            measure.r()
        )));
    }
    rule.integrate(f)
}

/// `∫ |z^α|² (-ρ)^r dV`; closed form on power-sum domains.
pub fn monomial_moment(measure: &WeightedMeasure, alpha: &[u32]) -> Result<f64> {
    check_dim(measure.dim(), alpha.len())?;
    measure
        .ln_moment_closed(alpha)
        .map(f64::exp)
        .ok_or_else(|| Error::Capability(format!("no closed-form moments on {}", measure.domain().name())))
}

/// Moment by quadrature; works on any domain with a rule.
pub fn monomial_moment_numeric(measure: &WeightedMeasure, alpha: &[u32], rule: &QuadratureRule) -> Result<f64> {
    check_dim(measure.dim(), alpha.len())?;
    let v = integrate(
        |z| {
            let m: f64 = z.iter().zip(alpha).map(|(c, &k)| c.norm_sqr().powi(k as i32)).product();
            C64::new(m, 0.0)
        },
        measure,
        rule,
    )?;
    Ok(v.re)
}

fn check_inflation_params(p: usize, r: f64) -> Result<()> {
    if p == 0 || !(r.is_finite() && r > 0.0 && r <= p as f64) {
        return Err(Error::Parameter(format!("inflation requires p >= 1 and 0 < r <= p, got p = {p}, r = {r}")));
    }
    Ok(())
}

/// `c_{p,r} = vol{w ∈ C^p : Σ_k |w_k|^{2p/r} < 1} = π^p Γ(1 + r/p)^p / Γ(1 + r)`.
pub fn inflation_constant(p: usize, r: f64) -> Result<f64> {
    check_inflation_params(p, r)?;
    let pf = p as f64;
    Ok((pf * PI.ln() + pf * ln_gamma(1.0 + r / pf) - ln_gamma(1.0 + r)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `|value - mean| <= k · std_error`.
    pub fn contains(&self, value: f64, k: f64) -> bool {
        (value - self.mean).abs() <= k * self.std_error
    }
}

/// Hit-or-miss volume of `{Σ_k |w_k|^{2p/r} < level}` inside the cube `[-side, side]^{2p}`.
fn fiber_volume_mc(p: usize, r: f64, level: f64, side: f64, samples: usize, seed: u64) -> McEstimate {
    let a = p as f64 / r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut s = 0.0;
        for _ in 0..p {
            let x = side * (2.0 * rng.random::<f64>() - 1.0);
            let y = side * (2.0 * rng.random::<f64>() - 1.0);
            let m = x * x + y * y;
            s += if a == 1.0 { m } else { m.powf(a) };
        }
        if s < level {
            hits += 1;
        }
    }
    let box_vol = (2.0 * side).powi(2 * p as i32);
    let f = hits as f64 / samples as f64;
    McEstimate {
        mean: box_vol * f,
        std_error: box_vol * (f * (1.0 - f) / samples as f64).sqrt(),
        samples,
    }
}

/// Monte Carlo estimate of `c_{p,r}` from the unit cube `[-1, 1]^{2p}`.
pub fn inflation_constant_mc(p: usize, r: f64, samples: usize, seed: u64) -> Result<McEstimate> {
    check_inflation_params(p, r)?;
    if samples == 0 {
        return Err(Error::Parameter("Monte Carlo needs at least one sample".into()));
    }
    Ok(fiber_volume_mc(p, r, 1.0, 1.0, samples, seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationResidual {
    /// Monte Carlo volume of the fiber `{Σ_k |w_k|^{2p/r} < -ρ(z)}`.
    pub lhs: McEstimate,
    /// `(-ρ(z))^r c_{p,r}`.
    pub rhs: f64,
    /// `|lhs - rhs| / rhs`.
    pub residual: f64,
}

/// Compares the fiber volume over `z` with `(-ρ(z))^r c_{p,r}`.
pub fn dilation_identity_check(
    domain: &Domain,
    p: usize,
    r: f64,
    z: &[C64],
    samples: usize,
    seed: u64,
) -> Result<DilationResidual> {
    check_inflation_params(p, r)?;
    let rho = domain.rho_eval(z)?;
    if rho >= 0.0 {
        return Err(Error::OutsideDomain { rho });
    }
    if samples == 0 {
        return Err(Error::Parameter("Monte Carlo needs at least one sample".into()));
    }
    let depth = -rho;
    let side = depth.powf(r / (2.0 * p as f64)).max(1.0);
    let lhs = fiber_volume_mc(p, r, depth, side, samples, seed);
    let rhs = depth.powf(r) * inflation_constant(p, r)?;
    Ok(DilationResidual {
        lhs,
        rhs,
        residual: (lhs.mean - rhs).abs() / rhs,
    })
}
