use std::f64::consts::PI;

use berezin_core::bergman::{build_space, KernelEvaluator};
use berezin_core::domains::{classify_boundary, Domain, PointKind};
use berezin_core::operators::{
    berezin, boundary_profile, decompose_product, materialize, tail_norm, toeplitz, OperatorExpr,
};
use berezin_core::quadrature::{monomial_moment, monomial_moment_numeric, QuadratureRule, WeightedMeasure};
use berezin_core::symbol::Symbol;
use berezin_core::C64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn ball_kernel_matches_closed_form() {
    // K(z,w) = (n+r)!/(π^n r!) (1 - <z,w>)^{-(n+r+1)} on B² with r = 1.
    let m = WeightedMeasure::new(Domain::ball(2).unwrap(), 1.0).unwrap();
    let ev = KernelEvaluator::new(build_space(&m, 40).unwrap());
    let z = [c(0.2, -0.1), c(0.1, 0.3)];
    let w = [c(-0.3, 0.2), c(0.25, 0.0)];
    let inner = z[0] * w[0].conj() + z[1] * w[1].conj();
    let exact = (c(1.0, 0.0) - inner).powf(-4.0) * (6.0 / (PI * PI));
    let k = ev.kernel(&z, &w).unwrap();
    assert!((k - exact).norm() / exact.norm() < 1e-10, "{k} vs {exact}");
}

#[test]
fn egg_moments_and_classification() {
    let egg = Domain::egg(2).unwrap();
    let m = WeightedMeasure::new(egg.clone(), 0.5).unwrap();
    let rule = QuadratureRule::default_for(&m).unwrap();
    for alpha in [[0, 0], [1, 0], [0, 2], [2, 1]] {
        let exact = monomial_moment(&m, &alpha).unwrap();
        let num = monomial_moment_numeric(&m, &alpha, &rule).unwrap();
        assert!((num - exact).abs() < 1e-8 * exact, "{alpha:?}");
    }
    // |z1|² + |z2|⁴ < 1: at (1,0) the tangent direction is z2, where |z2|⁴ is flat.
    let weak = classify_boundary(&egg, &[c(1.0, 0.0), c(0.0, 0.0)], None).unwrap();
    let strong = classify_boundary(&egg, &[c(0.0, 0.0), c(1.0, 0.0)], None).unwrap();
    assert_eq!(strong.kind, PointKind::StronglyPseudoconvex);
    assert_eq!(weak.kind, PointKind::WeaklyPseudoconvex);
}

#[test]
fn decomposition_reproduces_product_on_disk() {
    let sp = build_space(&WeightedMeasure::new(Domain::disk(), 1.0).unwrap(), 40).unwrap();
    let syms: Vec<Symbol> = ["conj(z)", "z^2", "conj(z)"].iter().map(|s| Symbol::parse(s).unwrap()).collect();
    let lhs = materialize(&decompose_product(&syms).unwrap(), &sp).unwrap();
    let mut prod = OperatorExpr::toeplitz(syms[0].clone());
    for s in &syms[1..] {
        prod = prod.times(&OperatorExpr::toeplitz(s.clone()));
    }
    let rhs = materialize(&prod, &sp).unwrap();
    // Compare away from the truncation edge.
    let k = 30;
    let diff = lhs
        .matrix()
        .top_left(k, k)
        .max_abs_diff(&rhs.matrix().top_left(k, k), k, k)
        .unwrap();
    assert!(diff < 1e-12, "{diff}");
}

#[test]
fn profiles_on_the_ball() {
    let sp = build_space(&WeightedMeasure::new(Domain::ball(2).unwrap(), 0.0).unwrap(), 32).unwrap();
    let op = toeplitz(&sp, &Symbol::parse("1 - abs2(z1) - abs2(z2)").unwrap()).unwrap();
    let prof = boundary_profile(&op, &[c(0.6, 0.0), c(0.0, 0.8)], &[0.5, 0.7, 0.9]).unwrap();
    assert!(decreasing(&prof));
    assert!(prof.iter().all(|s| s.value.im.abs() < 1e-12));
    let t = tail_norm(&op, 16).unwrap();
    assert!(t < 0.2, "{t}");
}

fn decreasing(p: &[berezin_core::operators::ProfileSample]) -> bool {
    p.windows(2).all(|w| w[1].value.re < w[0].value.re)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn kernel_is_hermitian_and_berezin_of_real_symbol_is_real(
        a in -0.5f64..0.5, b in -0.5f64..0.5, x in -0.5f64..0.5, y in -0.5f64..0.5,
    ) {
        let sp = build_space(&WeightedMeasure::new(Domain::ball(2).unwrap(), 0.5).unwrap(), 12).unwrap();
        let ev = KernelEvaluator::new(sp.clone());
        let z = [c(a, b), c(x, 0.1)];
        let w = [c(y, -0.2), c(b, a)];
        let kzw = ev.kernel(&z, &w).unwrap();
        let kwz = ev.kernel(&w, &z).unwrap();
        prop_assert!((kzw - kwz.conj()).norm() < 1e-12 * kzw.norm().max(1.0));
        let op = toeplitz(&sp, &Symbol::parse("abs2(z1) + re(z2)").unwrap()).unwrap();
        let bz = berezin(&op, &z).unwrap();
        prop_assert!(bz.im.abs() < 1e-12);
    }
}
