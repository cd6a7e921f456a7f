//! Experiment runner over `berezin-core`: JSON configurations in, CSV tables and a
//! JSON report out.
//!
//! Every table is written as `<name>.csv` and mirrored in `report.json`. Fixed
//! headers: Berezin profiles `t,re_berezin,im_berezin,trunc_flag`; tail norms
//! `k,tail_norm`.

pub mod config;
pub mod experiments;
pub mod opjson;
pub mod report;

use config::{Experiment, ExperimentConfig};
use report::Report;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] berezin_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Runs `experiment`, which takes precedence over the `experiment` key of `cfg`.
/// The report's config hash covers the effective configuration.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig) -> Result<Report, LabError> {
    let mut cfg = cfg.clone();
    cfg.experiment = Some(experiment);
    let mut report = Report::new(experiment, cfg.hash());
    use experiments as ex;
    match experiment {
        Experiment::KernelCheck => ex::kernel_check(&cfg, &mut report)?,
        Experiment::InflationCheck => ex::inflation_check(&cfg, &mut report)?,
        Experiment::Moments => ex::moments(&cfg, &mut report)?,
        Experiment::BerezinProfile => ex::berezin_profile(&cfg, &mut report)?,
        Experiment::SemiCommutator => ex::semi_commutator(&cfg, &mut report)?,
        Experiment::AxlerZheng => ex::axler_zheng(&cfg, &mut report)?,
        Experiment::Classify => ex::classify(&cfg, &mut report)?,
        Experiment::Constants => ex::constants(&cfg, &mut report)?,
        Experiment::MassConcentration => ex::mass_concentration(&cfg, &mut report)?,
        Experiment::Comparability => ex::comparability(&cfg, &mut report)?,
    }
    Ok(report)
}

/// Exit status of a finished run: 0, or 2 when the verdict is inconsistent.
pub fn exit_code(report: &Report) -> i32 {
    match report.verdict {
        Some(report::Verdict::Inconsistent) => 2,
        _ => 0,
    }
}
