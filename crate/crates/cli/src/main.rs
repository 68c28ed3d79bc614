use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dilab_core::bounds::DOMINATION_TOLERANCE;
use dilab_core::experiments::{
    fit_rate, run_bounds_report, run_convergence_study, Column, ExperimentConfig, CONVERGENCE_CSV,
    CONVERGENCE_SVG,
};
use dilab_core::{oracle, Error};

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Stability lab for doubly-intractable posteriors.
#[derive(Debug, Parser)]
#[command(name = "dilab", version)]
struct Cli {
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the stability bounds of an explicit (Z, Zt) pair.
    Bounds { config: PathBuf },
    /// Run a Monte Carlo convergence study.
    Converge { config: PathBuf },
    /// Run the brute-force oracle suites.
    Oracle,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        _ => EXIT_CONFIG,
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    Ok(config)
}

fn bounds(cli: &Cli, path: &Path) -> Result<u8, Error> {
    let config = load(cli, path)?;
    let (report, csv) = run_bounds_report(&config)?;
    let violations = report.violations(DOMINATION_TOLERANCE);
    for v in &violations {
        eprintln!(
            "violation: {} = {:?} below true {} distance",
            v.name,
            v.value(),
            v.dominates
        );
    }
    println!("wrote {}", csv.display());
    Ok(if violations.is_empty() { 0 } else { EXIT_VIOLATION })
}

fn converge(cli: &Cli, path: &Path) -> Result<u8, Error> {
    let config = load(cli, path)?;
    let out = run_convergence_study(&config)?;
    for column in [Column::MeanTv, Column::MeanW1] {
        match fit_rate(&out.table, column) {
            Ok(f) => println!("{column:?}: slope {:.4}, r2 {:.4}", f.slope, f.r2),
            Err(e) => println!("{column:?}: no rate fit ({e})"),
        }
    }
    println!(
        "wrote {} and {}",
        config.out.join(CONVERGENCE_CSV).display(),
        config.out.join(CONVERGENCE_SVG).display()
    );
    Ok(0)
}

fn run_oracle(cli: &Cli) -> Result<u8, Error> {
    let checks = oracle::run_all(cli.seed.unwrap_or(0))?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    Ok(if failed == 0 { 0 } else { EXIT_VIOLATION })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match &cli.command {
        Command::Bounds { config } => bounds(&cli, config),
        Command::Converge { config } => converge(&cli, config),
        Command::Oracle => run_oracle(&cli),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
