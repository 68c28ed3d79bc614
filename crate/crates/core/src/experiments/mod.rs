//! Batch experiment drivers: bound reports and convergence studies.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]; outputs are
//! byte-identical for identical configs regardless of the thread count.

mod config;
mod fit;
mod plot;
mod study;

use std::path::PathBuf;

pub use config::{ExperimentConfig, FamilyConfig, GridConfig, PhiSpec, Scenario};
pub use fit::{fit_rate, RateFit};
pub use plot::{emit_plot, render_svg};
pub use study::{
    convergence_table, Column, ConvergenceRow, ConvergenceTable, PreparedStudy, StudyOutput,
    StudyPoint,
};

use crate::bounds::BoundReport;
use crate::error::Result;

pub const BOUNDS_CSV: &str = "bounds.csv";
pub const CONVERGENCE_CSV: &str = "convergence.csv";
pub const CONVERGENCE_SVG: &str = "convergence.svg";

/// Evaluates the selected bounds of a pair scenario and writes `bounds.csv`
/// into the output directory.
pub fn run_bounds_report(config: &ExperimentConfig) -> Result<(BoundReport, PathBuf)> {
    let (spec_z, spec_zt) = config.pair_specs()?;
    let report = BoundReport::evaluate(&spec_z, &spec_zt, &config.selection(), &config.bound_options())?;
    std::fs::create_dir_all(&config.out)?;
    let path = config.out.join(BOUNDS_CSV);
    std::fs::write(&path, report.to_csv())?;
    Ok((report, path))
}

/// Runs a convergence study and writes `convergence.csv`, `convergence.svg`
/// and, when requested, the ensembles.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<StudyOutput> {
    let out = convergence_table(config)?;
    std::fs::create_dir_all(&config.out)?;
    std::fs::write(config.out.join(CONVERGENCE_CSV), out.table.to_csv())?;
    emit_plot(&out.table, &config.out.join(CONVERGENCE_SVG))?;
    for e in &out.ensembles {
        let stem = format!("ensemble_N{}", e.n_samples);
        std::fs::write(config.out.join(format!("{stem}.csv")), e.to_csv())?;
        std::fs::write(config.out.join(format!("{stem}.bin")), e.to_binary())?;
    }
    Ok(out)
}
