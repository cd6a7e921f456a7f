//! The named experiments. Each fills a [`Report`] from a configuration.

use std::f64::consts::PI;
use std::sync::Arc;

use berezin_core::bergman::{
    build_space, default_truncation, diagonal_comparability_check, inflation_kernel_check, mass_outside,
    KernelEvaluator, WeightedSpace,
};
use berezin_core::domains::{classify_boundary, inflate, Domain, PointKind};
use berezin_core::multiindex::MonomialSet;
use berezin_core::operators::{
    boundary_profile, decomposition_residual, materialize, report_for, semi_commutator_residual, AzConfig,
    TruncatedOperator,
};
use berezin_core::quadrature::{
    inflation_constant, inflation_constant_mc, monomial_moment, monomial_moment_numeric, QuadratureRule,
    QuadratureSpec, WeightedMeasure, DEFAULT_MC_SAMPLES,
};
use berezin_core::special::ln_gamma;
use berezin_core::symbol::Symbol;
use berezin_core::C64;
use rayon::prelude::*;

use crate::config::{to_point, ExperimentConfig, GridSpec};
use crate::report::{Cell, Report, Table, Verdict};
use crate::LabError;

fn coord_columns(n: usize) -> Vec<String> {
    if n == 1 {
        return vec!["z_re".into(), "z_im".into()];
    }
    (1..=n).flat_map(|j| [format!("z{j}_re"), format!("z{j}_im")]).collect()
}

fn coord_cells(p: &[C64]) -> Vec<Cell> {
    p.iter().flat_map(|c| [Cell::Float(c.re), Cell::Float(c.im)]).collect()
}

fn table_with(name: &str, lead: &[&str], n: usize, tail: &[&str]) -> Table {
    let mut cols: Vec<&str> = lead.to_vec();
    let coords = coord_columns(n);
    cols.extend(coords.iter().map(String::as_str));
    cols.extend_from_slice(tail);
    Table::new(name, &cols)
}

fn truncation(cfg: &ExperimentConfig, dim: usize) -> u32 {
    cfg.n.unwrap_or_else(|| default_truncation(dim))
}

fn space(cfg: &ExperimentConfig) -> Result<Arc<WeightedSpace>, LabError> {
    let measure = cfg.measure()?;
    let n = truncation(cfg, measure.dim());
    Ok(build_space(&measure, n)?)
}

fn require_unit_ball(domain: &Domain) -> Result<(), LabError> {
    match domain.power_sum() {
        Some(ps) if ps.q == 1.0 && ps.exponents.iter().all(|&a| a == 1.0) => Ok(()),
        _ => Err(LabError::Config(format!(
            "no closed-form kernel on `{}`; use the disk or a ball",
            domain.name()
        ))),
    }
}

/// `K(z, w)` of `A²(B^n, (1 - |z|²)^r dV)`.
pub fn ball_kernel(n: usize, r: f64, z: &[C64], w: &[C64]) -> C64 {
    let inner: C64 = z.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
    let nf = n as f64;
    let c = (ln_gamma(nf + r + 1.0) - ln_gamma(r + 1.0)).exp() / PI.powi(n as i32);
    (C64::new(1.0, 0.0) - inner).powf(-(nf + r + 1.0)) * c
}

fn flag_warning(report: &mut Report, flagged: usize, what: &str) {
    if flagged > 0 {
        report
            .warnings
            .push(format!("{flagged} {what} lie inside the kernel accuracy band near the boundary"));
    }
}

pub fn kernel_check(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let measure = cfg.measure()?;
    let domain = measure.domain().clone();
    require_unit_ball(&domain)?;
    let n = domain.dim();
    let sp = space(cfg)?;
    let default = if n == 1 {
        GridSpec::Lattice { size: 10, radius: 0.8 }
    } else {
        GridSpec::Random { count: 20, radius: 0.8 }
    };
    let pts = cfg.points_or(&default, &domain)?;
    let ev = KernelEvaluator::new(sp.clone());
    let mut flagged = 0;
    for p in &pts {
        if ev.normalized_kernel(p)?.flagged {
            flagged += 1;
        }
    }
    let basis: Vec<Vec<C64>> = pts.iter().map(|p| sp.eval_basis(p)).collect();
    let (scale, r) = (measure.scale(), measure.r());
    let rows: Vec<Vec<Cell>> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let (basis, pts) = (&basis, &pts);
            (0..pts.len()).map(move |j| {
                let k: C64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b.conj()).sum();
                let exact = ball_kernel(n, r, &pts[i], &pts[j]) / scale;
                let rel = (k - exact).norm() / exact.norm();
                vec![
                    i.into(),
                    j.into(),
                    k.re.into(),
                    k.im.into(),
                    exact.re.into(),
                    exact.im.into(),
                    rel.into(),
                ]
            })
        })
        .collect();
    let max_rel = rows
        .iter()
        .map(|r| match r[6] {
            Cell::Float(x) => x,
            _ => unreachable!(),
        })
        .fold(0.0, f64::max);
    let mut points = table_with("points", &["i"], n, &[]);
    for (i, p) in pts.iter().enumerate() {
        let mut row = vec![i.into()];
        row.extend(coord_cells(p));
        points.push(row);
    }
    let mut residuals = Table::new(
        "residuals",
        &["i", "j", "kernel_re", "kernel_im", "exact_re", "exact_im", "rel_error"],
    );
    residuals.rows = rows;
    let tol = cfg.tolerance.unwrap_or(1e-8);
    report.set("N", sp.n_trunc());
    report.set("basis_size", sp.len());
    report.set("points", pts.len());
    report.set_f64("max_rel_error", max_rel);
    report.set_f64("tolerance", tol);
    flag_warning(report, flagged, "sample points");
    report.tables.push(points);
    report.tables.push(residuals);
    report.verdict = Some(Verdict::from_bool(max_rel < tol));
    Ok(())
}

pub fn inflation_check(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let measure = cfg.measure()?;
    let domain = measure.domain().clone();
    let n = domain.dim();
    let p = cfg.p.unwrap_or(1);
    let r = measure.r();
    let sp = space(cfg)?;
    let default = if n == 1 {
        GridSpec::Lattice { size: 6, radius: 0.6 }
    } else {
        GridSpec::Random { count: 8, radius: 0.6 }
    };
    let pts = cfg.points_or(&default, &domain)?;
    // The inflation of a unit ball by p = r fibers is again a unit ball.
    let infl = inflate(&domain, p, r)?;
    let closed = require_unit_ball(&infl.domain()).is_ok() && measure.scale() == 1.0;
    let c_pr = inflation_constant(p, r)?;
    let pairs: Vec<(usize, usize)> = (0..pts.len()).flat_map(|i| (0..pts.len()).map(move |j| (i, j))).collect();
    let checks = pairs
        .par_iter()
        .map(|&(i, j)| {
            let chk = inflation_kernel_check(&sp, p, &pts[i], &pts[j])?;
            let closed_value = closed.then(|| {
                let lift = |v: &[C64]| {
                    let mut out = v.to_vec();
                    out.extend(std::iter::repeat_n(C64::new(0.0, 0.0), p));
                    out
                };
                ball_kernel(n + p, 0.0, &lift(&pts[i]), &lift(&pts[j])) * c_pr
            });
            Ok((i, j, chk, closed_value))
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let mut cols = vec!["i", "j", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual"];
    if closed {
        cols.extend(["closed_re", "closed_im", "closed_residual"]);
    }
    let mut table = Table::new("residuals", &cols);
    let (mut max_res, mut max_closed) = (0.0f64, 0.0f64);
    let mut inflated_len = 0;
    for (i, j, chk, cv) in checks {
        inflated_len = chk.inflated_len;
        max_res = max_res.max(chk.residual);
        let mut row: Vec<Cell> = vec![
            i.into(),
            j.into(),
            chk.lhs.re.into(),
            chk.lhs.im.into(),
            chk.rhs.re.into(),
            chk.rhs.im.into(),
            chk.residual.into(),
        ];
        if let Some(v) = cv {
            let res = (chk.lhs - v).norm() / chk.lhs.norm();
            max_closed = max_closed.max(res);
            row.extend([v.re.into(), v.im.into(), res.into()]);
        }
        table.push(row);
    }
    let tol = cfg.tolerance.unwrap_or(1e-6);
    report.set("N", sp.n_trunc());
    report.set("p", p);
    report.set_f64("r", r);
    report.set_f64("c_pr", c_pr);
    report.set("inflated_domain", infl.domain().name().to_string());
    report.set("inflated_basis_size", inflated_len);
    report.set("pairs", table.rows.len());
    report.set_f64("max_residual", max_res);
    if closed {
        report.set_f64("max_closed_residual", max_closed);
    }
    report.set_f64("tolerance", tol);
    report.tables.push(table);
    report.verdict = Some(Verdict::from_bool(max_res.max(max_closed) < tol));
    Ok(())
}

pub fn moments(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let measure = cfg.measure()?;
    let degree = cfg.n.unwrap_or(4);
    let spec = cfg
        .quadrature
        .as_ref()
        .map(|q| q.spec(cfg.seed()))
        .unwrap_or(QuadratureSpec::Default);
    let rule = QuadratureRule::build(&measure, spec)?;
    let set = MonomialSet::new(measure.dim(), degree);
    let rows = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let alpha = set.get(i);
            let exact = monomial_moment(&measure, alpha)?;
            let numeric = monomial_moment_numeric(&measure, alpha, &rule)?;
            Ok((i, alpha.to_vec(), exact, numeric))
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let mut table = Table::new("moments", &["i", "alpha", "closed_form", "numeric", "rel_error"]);
    let mut worst = 0.0f64;
    for (i, alpha, exact, numeric) in rows {
        let rel = (numeric - exact).abs() / exact.abs();
        worst = worst.max(rel);
        let alpha: Vec<String> = alpha.iter().map(u32::to_string).collect();
        table.push(vec![i.into(), alpha.join(";").into(), exact.into(), numeric.into(), rel.into()]);
    }
    let tol = cfg.tolerance.unwrap_or(1e-8);
    report.set("max_degree", degree);
    report.set("nodes", rule.len());
    report.set_f64("max_rel_error", worst);
    report.set_f64("tolerance", tol);
    report.tables.push(table);
    report.verdict = Some(Verdict::from_bool(worst < tol));
    Ok(())
}

fn operator(cfg: &ExperimentConfig, sp: &Arc<WeightedSpace>) -> Result<TruncatedOperator, LabError> {
    let node = cfg
        .operator
        .as_ref()
        .ok_or_else(|| LabError::Config("missing `operator`".into()))?;
    Ok(materialize(&node.to_expr()?, sp)?)
}

fn t_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.t_grid
        .clone()
        .unwrap_or_else(berezin_core::operators::default_t_grid)
}

/// Explicit strong/weak points plus classified boundary samples.
fn classified_points(cfg: &ExperimentConfig, domain: &Domain) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>), LabError> {
    let mut strong: Vec<Vec<C64>> = cfg.strong_points.iter().flatten().map(to_point).collect();
    let mut weak: Vec<Vec<C64>> = cfg.weak_points.iter().flatten().map(to_point).collect();
    if let Some(count) = cfg.auto_classify {
        for p in (GridSpec::Boundary { count }).points(domain, cfg.seed())? {
            match classify_boundary(domain, &p, cfg.tolerance)?.kind {
                PointKind::StronglyPseudoconvex => strong.push(p),
                PointKind::WeaklyPseudoconvex => weak.push(p),
            }
        }
    }
    Ok((strong, weak))
}

pub fn berezin_profile(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let sp = space(cfg)?;
    let domain = sp.domain().clone();
    let op = operator(cfg, &sp)?;
    let grid = t_grid(cfg);
    let mut pts: Vec<Vec<C64>> = cfg.points.iter().flatten().map(to_point).collect();
    if cfg.auto_classify.is_some() || cfg.strong_points.is_some() || cfg.weak_points.is_some() {
        let (s, w) = classified_points(cfg, &domain)?;
        pts.extend(s);
        pts.extend(w);
    }
    if pts.is_empty() {
        if domain.dim() != 1 {
            return Err(LabError::Config("missing boundary `points`".into()));
        }
        pts.push(vec![C64::new(1.0, 0.0)]);
    }
    let symbol = cfg
        .operator
        .as_ref()
        .and_then(|o| o.single_symbol())
        .map(Symbol::parse)
        .transpose()?;
    let n = domain.dim();
    let mut cols: Vec<&str> = vec!["i"];
    let coords = coord_columns(n);
    cols.extend(coords.iter().map(String::as_str));
    cols.extend(["terminal_t", "terminal_re", "terminal_im"]);
    if symbol.is_some() {
        cols.extend(["limit_re", "limit_im", "deviation"]);
    }
    let mut summary = Table::new("terminal", &cols);
    let mut flagged = 0;
    let mut worst = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        let prof = boundary_profile(&op, p, &grid)?;
        flagged += prof.iter().filter(|s| s.flagged).count();
        let last = prof.last().expect("nonempty grid");
        let mut row = vec![i.into()];
        row.extend(coord_cells(p));
        row.extend([last.t.into(), last.value.re.into(), last.value.im.into()]);
        if let Some(phi) = &symbol {
            let limit = phi.eval(p);
            let dev = (last.value - limit).norm();
            worst = worst.max(dev);
            row.extend([limit.re.into(), limit.im.into(), dev.into()]);
        }
        summary.push(row);
        let name = if pts.len() == 1 { "profile".to_string() } else { format!("profile_{i}") };
        report.tables.push(Table::profile(name, &prof));
    }
    report.set("N", sp.n_trunc());
    report.set("points", pts.len());
    report.set("operator", op.provenance().to_string());
    flag_warning(report, flagged, "profile samples");
    if symbol.is_some() {
        let tol = cfg.tolerance.unwrap_or(0.05);
        report.set_f64("max_deviation", worst);
        report.set_f64("tolerance", tol);
        report.verdict = Some(Verdict::from_bool(worst < tol));
    }
    report.tables.push(summary);
    Ok(())
}

fn monomial_symbols(n: usize, degree: u32) -> Vec<(String, u32)> {
    let set = MonomialSet::new(2 * n, degree);
    let var = |j: usize| if n == 1 { "z".to_string() } else { format!("z{}", j + 1) };
    set.iter()
        .map(|e| {
            let mut parts = Vec::new();
            for (j, &k) in e[..n].iter().enumerate() {
                if k > 0 {
                    parts.push(format!("{}^{k}", var(j)));
                }
            }
            for (j, &k) in e[n..].iter().enumerate() {
                if k > 0 {
                    parts.push(format!("conj({})^{k}", var(j)));
                }
            }
            let s = if parts.is_empty() { "1".to_string() } else { parts.join("*") };
            (s, e.iter().sum())
        })
        .collect()
}

pub fn semi_commutator(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let sp = space(cfg)?;
    let n = sp.dim();
    let cases: Vec<Vec<String>> = match &cfg.symbols {
        Some(lists) => lists.clone(),
        None => {
            let monos = monomial_symbols(n, cfg.monomial_degree.unwrap_or(2));
            let mut cases = Vec::new();
            for a in &monos {
                for b in &monos {
                    cases.push(vec![a.0.clone(), b.0.clone()]);
                }
            }
            if cfg.max_factors.unwrap_or(3) >= 3 {
                for a in &monos {
                    for b in &monos {
                        for c in &monos {
                            cases.push(vec![a.0.clone(), b.0.clone(), c.0.clone()]);
                        }
                    }
                }
            }
            cases
        }
    };
    let results = cases
        .par_iter()
        .map(|case| {
            let syms = case.iter().map(|s| Symbol::parse(s)).collect::<Result<Vec<_>, _>>()?;
            let mut margin = 0;
            for s in &syms {
                margin += s
                    .to_polynomial(n)
                    .ok_or_else(|| LabError::Config(format!("symbol `{s}` is not a polynomial")))?
                    .total_degree();
            }
            let res = match syms.as_slice() {
                [a, b] => semi_commutator_residual(&sp, a, b, margin)?,
                _ => decomposition_residual(&sp, &syms, margin)?,
            };
            Ok((margin, res))
        })
        .collect::<Result<Vec<_>, LabError>>()?;
    let mut table = Table::new("residuals", &["case", "symbols", "factors", "margin", "residual"]);
    let mut worst = 0.0f64;
    for (i, (case, (margin, res))) in cases.iter().zip(results).enumerate() {
        worst = worst.max(res);
        table.push(vec![i.into(), case.join(" | ").into(), case.len().into(), margin.into(), res.into()]);
    }
    let tol = cfg.tolerance.unwrap_or(1e-9);
    report.set("N", sp.n_trunc());
    report.set("cases", table.rows.len());
    report.set_f64("max_residual", worst);
    report.set_f64("tolerance", tol);
    report.tables.push(table);
    report.verdict = Some(Verdict::from_bool(worst < tol));
    Ok(())
}

pub fn axler_zheng(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let sp = space(cfg)?;
    let domain = sp.domain().clone();
    let op = operator(cfg, &sp)?;
    let (strong, weak) = classified_points(cfg, &domain)?;
    let mut az = AzConfig {
        t_grid: t_grid(cfg),
        ..AzConfig::default()
    };
    if let Some(th) = &cfg.thresholds {
        az.vanish_threshold = th.vanish.unwrap_or(az.vanish_threshold);
        az.tail_threshold = th.tail.unwrap_or(az.tail_threshold);
        az.window = th.window.unwrap_or(az.window);
    }
    let rep = report_for(&op, &strong, &weak, &az)?;
    let n = domain.dim();
    let mut points = table_with("points", &["set", "i"], n, &["terminal_abs", "decreasing"]);
    let mut flagged = 0;
    for (set, profiles) in [("strong", &rep.strong), ("weak", &rep.weak)] {
        for (i, p) in profiles.iter().enumerate() {
            flagged += p.samples.iter().filter(|s| s.flagged).count();
            let mut row: Vec<Cell> = vec![set.into(), i.into()];
            row.extend(coord_cells(&p.point));
            row.extend([p.terminal.into(), p.decreasing.into()]);
            points.push(row);
            report.tables.push(Table::profile(format!("{set}_profile_{i}"), &p.samples));
        }
    }
    let mut tail = Table::new("tail", &["k", "tail_norm"]);
    for &(k, v) in &rep.tail {
        tail.push(vec![k.into(), v.into()]);
    }
    report.tables.push(points);
    report.tables.push(tail);
    report.set("N", sp.n_trunc());
    report.set("operator", op.provenance().to_string());
    report.set("strong_points", strong.len());
    report.set("weak_points", weak.len());
    report.set_f64("strong_sup", rep.strong_sup);
    report.set_f64("weak_sup", rep.weak_sup);
    report.set("strong_vanishing", rep.strong_vanishing);
    report.set("weak_nonvanishing", rep.weak_nonvanishing);
    report.set_f64("tail_at_half", rep.tail_at_half);
    report.set("tail_nonvanishing", rep.tail_nonvanishing);
    report.set_f64("vanish_threshold", az.vanish_threshold);
    report.set_f64("tail_threshold", az.tail_threshold);
    report.set("interpretation", rep.interpretation.clone());
    flag_warning(report, flagged, "profile samples");
    report.verdict = Some(match rep.verdict {
        berezin_core::operators::Verdict::Consistent => Verdict::Consistent,
        berezin_core::operators::Verdict::Inconsistent => Verdict::Inconsistent,
    });
    Ok(())
}

pub fn classify(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let domain = cfg.domain()?;
    let pts = cfg.points_or(&GridSpec::Boundary { count: 64 }, &domain)?;
    let n = domain.dim();
    let mut table = table_with("classification", &["i"], n, &["kind", "min_tangential_eigenvalue", "tolerance"]);
    let (mut strong, mut weak) = (0, 0);
    for (i, p) in pts.iter().enumerate() {
        let c = classify_boundary(&domain, p, cfg.tolerance)?;
        match c.kind {
            PointKind::StronglyPseudoconvex => strong += 1,
            PointKind::WeaklyPseudoconvex => weak += 1,
        }
        let mut row = vec![i.into()];
        row.extend(coord_cells(p));
        row.extend([
            c.kind.as_str().into(),
            c.min_tangential_eigenvalue.into(),
            c.tolerance_used.into(),
        ]);
        table.push(row);
    }
    report.set("domain", domain.name().to_string());
    report.set("strong", strong);
    report.set("weak", weak);
    report.tables.push(table);
    Ok(())
}

pub fn constants(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let cases = cfg
        .cases
        .clone()
        .unwrap_or_else(|| vec![(cfg.p.unwrap_or(1), cfg.r.unwrap_or(1.0))]);
    let samples = cfg.samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let seed = cfg.seed();
    let mut table = Table::new(
        "constants",
        &[
            "p",
            "r",
            "closed_form",
            "mc_mean",
            "mc_std_error",
            "z_score",
            "within_3se",
            "factorial_form",
            "factorial_rel_error",
        ],
    );
    let mut ok = true;
    for &(p, r) in &cases {
        let closed = inflation_constant(p, r)?;
        let mc = inflation_constant_mc(p, r, samples, seed)?;
        let z = (closed - mc.mean).abs() / mc.std_error;
        let within = mc.contains(closed, 3.0);
        ok &= within;
        let mut row: Vec<Cell> = vec![
            p.into(),
            r.into(),
            closed.into(),
            mc.mean.into(),
            mc.std_error.into(),
            z.into(),
            within.into(),
        ];
        if r == p as f64 {
            // c_{p,p} = π^p / p!
            let fact: f64 = (1..=p).map(|k| k as f64).product();
            let exact = PI.powi(p as i32) / fact;
            let rel = (closed - exact).abs() / exact;
            ok &= rel <= 1e-12;
            row.extend([exact.into(), rel.into()]);
        } else {
            row.extend([Cell::Text(String::new()), Cell::Text(String::new())]);
        }
        table.push(row);
    }
    if let [(_, _)] = cases.as_slice() {
        if let Some(Cell::Float(v)) = table.rows[0].get(2) {
            report.set_f64("value", *v);
        }
    }
    report.set("samples", samples);
    report.set("seed", seed);
    report.tables.push(table);
    report.verdict = Some(Verdict::from_bool(ok));
    Ok(())
}

pub fn mass_concentration(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let sp = space(cfg)?;
    let measure = sp.measure().clone();
    let domain = measure.domain().clone();
    let n = domain.dim();
    let pts: Vec<Vec<C64>> = match &cfg.points {
        Some(p) => p.iter().map(to_point).collect(),
        None if n == 1 => vec![vec![C64::new(0.99, 0.0)]],
        None => return Err(LabError::Config("missing `points`".into())),
    };
    let (center, radius) = match &cfg.region {
        Some(reg) => (to_point(&reg.center), reg.radius),
        None if n == 1 => (vec![C64::new(1.0, 0.0)], 0.3),
        None => return Err(LabError::Config("missing `region`".into())),
    };
    if center.len() != n {
        return Err(LabError::Config("region center has the wrong dimension".into()));
    }
    let spec = cfg
        .quadrature
        .as_ref()
        .map(|q| q.spec(cfg.seed()))
        .unwrap_or(QuadratureSpec::Default);
    let rule = QuadratureRule::build(&measure, spec)?;
    let ev = KernelEvaluator::new(sp.clone());
    let outside = |w: &[C64]| {
        let d2: f64 = w.iter().zip(&center).map(|(a, b)| (a - b).norm_sqr()).sum();
        d2 >= radius * radius
    };
    let mut table = table_with("mass", &["i"], n, &["depth", "trunc_flag", "mass_outside"]);
    let mut worst = 0.0f64;
    let mut flagged = 0;
    for (i, z) in pts.iter().enumerate() {
        let nk = ev.normalized_kernel(z)?;
        let m = mass_outside(&ev, z, outside, &rule)?;
        worst = worst.max(m);
        flagged += nk.flagged as usize;
        let mut row = vec![i.into()];
        row.extend(coord_cells(z));
        row.extend([nk.depth.into(), nk.flagged.into(), m.into()]);
        table.push(row);
    }
    let tol = cfg.tolerance.unwrap_or(0.1);
    report.set("N", sp.n_trunc());
    report.set("nodes", rule.len());
    report.set_f64("radius", radius);
    report.set_f64("max_mass_outside", worst);
    report.set_f64("tolerance", tol);
    flag_warning(report, flagged, "kernel points");
    report.tables.push(table);
    report.verdict = Some(Verdict::from_bool(worst < tol));
    Ok(())
}

pub fn comparability(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), LabError> {
    let first = space(cfg)?;
    let cmp = cfg
        .compare
        .as_ref()
        .ok_or_else(|| LabError::Config("missing `compare`".into()))?;
    let mut m2 = WeightedMeasure::new(cmp.domain.build()?, cmp.r)?;
    if let Some(s) = cmp.scale {
        m2 = m2.scaled(s)?;
    }
    let second = build_space(&m2, first.n_trunc())?;
    let domain = first.domain().clone();
    let pts = cfg.points_or(&GridSpec::Random { count: 50, radius: 0.95 }, &domain)?;
    let (ev1, ev2) = (KernelEvaluator::new(first.clone()), KernelEvaluator::new(second));
    let rep = diagonal_comparability_check(&ev1, &ev2, &pts, cmp.c)?;
    let n = domain.dim();
    let mut table = table_with("ratios", &["i"], n, &["ratio"]);
    for (i, (p, ratio)) in pts.iter().zip(&rep.ratios).enumerate() {
        let mut row = vec![i.into()];
        row.extend(coord_cells(p));
        row.push((*ratio).into());
        table.push(row);
    }
    report.set("N", first.n_trunc());
    report.set("samples", pts.len());
    report.set_f64("min_ratio", rep.min_ratio);
    report.set_f64("max_ratio", rep.max_ratio);
    report.set_f64("c", rep.c);
    report.set("within_c", rep.within_c);
    report.set("within_c_squared", rep.within_d);
    report.tables.push(table);
    report.verdict = Some(Verdict::from_bool(rep.within_c));
    Ok(())
}
