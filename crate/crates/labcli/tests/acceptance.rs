//! Acceptance criteria 1-10. Each criterion prints one PASS/FAIL line with its
//! measurements and runtime; the test fails afterwards if any criterion failed.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use berezin_core::bergman::build_space;
use berezin_core::domains::Domain;
use berezin_core::operators::{boundary_profile, default_t_grid, materialize, tail_curve, toeplitz, OperatorExpr};
use berezin_core::quadrature::WeightedMeasure;
use berezin_core::symbol::Symbol;
use berezin_core::C64;
use berezin_lab::config::ExperimentConfig;
use berezin_lab::report::{Cell, Report, Verdict};
use serde_json::Value;

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn run(name: &str, log: &mut Vec<(String, Report)>) -> Report {
    let cfg = config(name);
    let rep = berezin_lab::run(cfg.experiment.expect("config names its experiment"), &cfg)
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    log.push((name.to_string(), rep.clone()));
    rep
}

fn num(rep: &Report, key: &str) -> f64 {
    match &rep.summary[key] {
        Value::Number(n) => n.as_f64().unwrap(),
        Value::String(s) => s.parse().unwrap(),
        v => panic!("{key}: {v}"),
    }
}

fn float(c: &Cell) -> f64 {
    match c {
        Cell::Float(x) => *x,
        Cell::Int(i) => *i as f64,
        Cell::Text(t) => panic!("text cell {t}"),
    }
}

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn judge(id: &'static str, start: Instant, limit_s: f64, ok: bool, detail: String) -> Outcome {
    let secs = start.elapsed().as_secs_f64();
    let pass = ok && secs < limit_s;
    let line = format!("{detail}; runtime {secs:.2} s (limit {limit_s} s)");
    println!("criterion {id}: {} {line}", if pass { "PASS" } else { "FAIL" });
    Outcome { id, pass, detail: line }
}

fn c1(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for r in 0..3 {
        let rep = run(&format!("kernel_disk_r{r}.json"), log);
        let e = num(&rep, "max_rel_error");
        worst = worst.max(e);
        parts.push(format!("r={r}: {e:.2e}"));
    }
    let ok = worst < 1e-8;
    let out = judge("1", t, 5.0, ok, format!("disk kernel max rel error {} (< 1e-8)", parts.join(", ")));
    // Informational: the closed disk |z|,|w| <= 0.8, including boundary pairs.
    let measure = WeightedMeasure::new(Domain::disk(), 2.0).unwrap();
    let sp = build_space(&measure, 64).unwrap();
    let pts: Vec<C64> = (0..10)
        .flat_map(|i| (0..10).map(move |j| C64::from_polar(0.8 * i as f64 / 9.0, 2.0 * std::f64::consts::PI * j as f64 / 10.0)))
        .collect();
    let mut closed = 0.0f64;
    for z in &pts {
        let bz = sp.eval_basis(&[*z]);
        for w in &pts {
            let bw = sp.eval_basis(&[*w]);
            let k: C64 = bz.iter().zip(&bw).map(|(a, b)| a * b.conj()).sum();
            let exact = berezin_lab::experiments::ball_kernel(1, 2.0, &[*z], &[*w]);
            closed = closed.max((k - exact).norm() / exact.norm());
        }
    }
    println!("    note: r=2 on a polar 10x10 grid of the closed disk |z| <= 0.8: max rel error {closed:.2e}");
    out
}

fn c2(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let a = run("inflation_disk_r1_p1.json", log);
    let b = run("inflation_disk_r2_p2.json", log);
    let ea = num(&a, "max_closed_residual").max(num(&a, "max_residual"));
    let eb = num(&b, "max_residual");
    judge(
        "2",
        t,
        60.0,
        ea < 1e-8 && eb < 1e-6,
        format!("r=1,p=1 vs B^2 kernel {ea:.2e} (< 1e-8); r=2,p=2 inflated moments {eb:.2e} (< 1e-6)"),
    )
}

fn c3(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let rep = run("constants.json", log);
    let table = rep.table("constants").unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for row in &table.rows {
        let z = float(&row[5]);
        ok &= float(&row[6]) == 1.0;
        parts.push(format!("({},{}) z={z:.2}", float(&row[0]), float(&row[1])));
        if let Cell::Float(e) = row[8] {
            ok &= e <= 1e-12;
            parts.push(format!("c_pp err {e:.1e}"));
        }
    }
    judge("3", t, 60.0, ok, format!("MC 1e7 samples seed 42: {}", parts.join(", ")))
}

fn c4(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for name in ["semicomm_disk_r0.json", "semicomm_disk_r1.json", "semicomm_ball2.json"] {
        let rep = run(name, log);
        worst = worst.max(num(&rep, "max_residual"));
        cases += rep.summary["cases"].as_u64().unwrap();
    }
    judge("4", t, 30.0, worst < 1e-9, format!("{cases} pair/triple cases, max residual {worst:.2e} (< 1e-9)"))
}

fn c5(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for i in 1..=6 {
        let r = if i <= 3 { 0 } else { 1 };
        let rep = run(&format!("profile_disk_r{r}_{i}.json"), log);
        worst = worst.max(num(&rep, "max_deviation"));
    }
    // Harmonic reproduction: B(T_{Re w})(t) = t up to a truncation error of order t^{2N+2}.
    let re = Symbol::parse("re(z)").unwrap();
    let harmonic = |n: u32| {
        let sp = build_space(&WeightedMeasure::new(Domain::disk(), 0.0).unwrap(), n).unwrap();
        let op = toeplitz(&sp, &re).unwrap();
        boundary_profile(&op, &[C64::new(1.0, 0.0)], &default_t_grid())
            .unwrap()
            .iter()
            .map(|s| (s.value - s.t).norm())
            .fold(0.0, f64::max)
    };
    let (h96, h400) = (harmonic(96), harmonic(400));
    judge(
        "5",
        t,
        30.0,
        worst < 0.05 && h400 < 1e-6,
        format!(
            "max |B(0.98) - phi(1)| at N=96 {worst:.3e} (< 0.05); |B(T_Re w)(t) - t| at N=400 {h400:.2e} (< 1e-6), at N=96 {h96:.2e}"
        ),
    )
}

fn c6(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let rep = run("mass_disk.json", log);
    let m = num(&rep, "max_mass_outside");
    judge(
        "6",
        t,
        5.0,
        m < 0.1,
        format!("off-U mass {m:.5} (< 0.1); warnings: {}", rep.warnings.len()),
    )
}

fn c7(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let a = run("az_disk_compact.json", log);
    let b = run("az_disk_identity.json", log);
    let tails = |rep: &Report| -> Vec<(f64, f64)> {
        rep.table("tail").unwrap().rows.iter().map(|r| (float(&r[0]), float(&r[1]))).collect()
    };
    let tail_err = tails(&a).iter().map(|(k, v)| (v - 1.0 / (k + 2.0)).abs()).fold(0.0, f64::max);
    let id_tail_err = tails(&b).iter().map(|(_, v)| (v - 1.0).abs()).fold(0.0, f64::max);
    let profile = |rep: &Report| -> Vec<f64> {
        rep.table("strong_profile_0").unwrap().rows.iter().map(|r| float(&r[1])).collect()
    };
    let pa = profile(&a);
    let decays = pa.windows(2).all(|w| w[1] <= w[0]) && *pa.last().unwrap() < 0.1;
    let id_berezin = profile(&b).iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let verdicts = a.verdict == Some(Verdict::Consistent) && b.verdict == Some(Verdict::Consistent);
    // The same tail identity for an operator built through the expression layer.
    let sp = build_space(&WeightedMeasure::new(Domain::disk(), 0.0).unwrap(), 64).unwrap();
    let expr = OperatorExpr::toeplitz(Symbol::parse("1 - abs2(z)").unwrap());
    let op = materialize(&expr, &Arc::clone(&sp)).unwrap();
    let direct = tail_curve(&op)
        .unwrap()
        .iter()
        .map(|&(k, v)| (v - 1.0 / (k as f64 + 2.0)).abs())
        .fold(0.0, f64::max);
    let ok = tail_err < 1e-9 && direct < 1e-9 && id_tail_err < 1e-12 && id_berezin < 1e-12 && decays && verdicts;
    judge(
        "7",
        t,
        10.0,
        ok,
        format!(
            "T_(1-|z|^2) tail error {:.1e} (< 1e-9), terminal Berezin {:.4}; identity tail error {id_tail_err:.1e}, Berezin error {id_berezin:.1e}; verdicts {} / {}",
            tail_err.max(direct),
            pa.last().unwrap(),
            a.verdict.unwrap().as_str(),
            b.verdict.unwrap().as_str()
        ),
    )
}

fn c8(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let rep = run("az_polydisk_localized.json", log);
    let strong_sup = num(&rep, "strong_sup");
    let tail = num(&rep, "tail_at_half");
    let n_strong = rep.summary["strong_points"].as_u64().unwrap();
    judge(
        "8",
        t,
        120.0,
        n_strong == 8 && strong_sup < 0.1 && tail > 0.5,
        format!("max Berezin terminal at {n_strong} strong points {strong_sup:.2e} (< 0.1); tail_norm(N/2) {tail:.4} (> 0.5)"),
    )
}

fn c9(log: &mut Vec<(String, Report)>) -> Outcome {
    let t = Instant::now();
    let rep = run("comparability_disk.json", log);
    let (lo, hi) = (num(&rep, "min_ratio"), num(&rep, "max_ratio"));
    let n = rep.summary["samples"].as_u64().unwrap();
    judge(
        "9",
        t,
        10.0,
        n == 50 && lo >= 0.5 && hi <= 2.0,
        format!("{n} kernel ratios in [{lo:.4}, {hi:.4}] (within [0.5, 2])"),
    )
}

fn c10(log: &[(String, Report)]) -> Outcome {
    let t = Instant::now();
    let mut tables = 0;
    let mut mismatches = Vec::new();
    for (name, first) in log {
        let cfg = config(name);
        let again = berezin_lab::run(cfg.experiment.unwrap(), &cfg).unwrap();
        for (a, b) in first.tables.iter().zip(&again.tables) {
            tables += 1;
            if a.to_csv().unwrap().as_bytes() != b.to_csv().unwrap().as_bytes() {
                mismatches.push(format!("{name}:{}", a.name));
            }
        }
        if first.tables.len() != again.tables.len() || first.config_hash != again.config_hash {
            mismatches.push(name.clone());
        }
    }
    judge(
        "10",
        t,
        f64::INFINITY,
        mismatches.is_empty(),
        format!("{} runs, {tables} CSV tables byte-identical on rerun; mismatches: {mismatches:?}", log.len()),
    )
}

#[test]
fn acceptance_criteria() {
    let mut log = Vec::new();
    let outcomes = vec![
        c1(&mut log),
        c2(&mut log),
        c3(&mut log),
        c4(&mut log),
        c5(&mut log),
        c6(&mut log),
        c7(&mut log),
        c8(&mut log),
        c9(&mut log),
        c10(&log),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("criterion {}: {}", o.id, o.detail))
        .collect();
    println!("{} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed:\n{}", failed.join("\n"));
}
