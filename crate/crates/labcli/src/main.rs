use std::path::PathBuf;
use std::process::ExitCode;

use berezin_lab::config::{Experiment, ExperimentConfig};
use berezin_lab::LabError;
use clap::Parser;

/// Run one weighted Bergman space experiment and write CSV tables plus report.json.
#[derive(Parser, Debug)]
#[command(name = "berezin-lab", version, about)]
struct Cli {
    experiment: Experiment,
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "BEREZIN_LAB_THREADS")]
    threads: Option<usize>,
}

fn run(cli: &Cli) -> Result<i32, LabError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| LabError::Config(format!("cannot start {t} threads: {e}")))?;
    }
    let report = berezin_lab::run(cli.experiment, &cfg)?;
    let dir = PathBuf::from(
        cfg.out
            .clone()
            .unwrap_or_else(|| format!("berezin-lab-out/{}", cli.experiment.name())),
    );
    let paths = report.write(&dir)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let verdict = report.verdict.map(|v| v.as_str()).unwrap_or("none");
    println!("{} verdict={} config_hash={}", cli.experiment.name(), verdict, report.config_hash);
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(berezin_lab::exit_code(&report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
