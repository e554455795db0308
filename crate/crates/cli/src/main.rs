//! Command-line front end: run experiments, convergence studies, spectra and self checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pmlwave::analysis::{assemble_global_operator, spectral_abscissa};
use pmlwave::config::ExperimentConfig;
use pmlwave::experiment::{convergence_study, run_experiment, ConvergenceMode};
use pmlwave::{Error, Result};
use serde_json::json;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "PMLWAVE_THREADS";

#[derive(Parser)]
#[command(name = "pmlwave", version, about = "DG spectral element acoustics with an energy-stable PML")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    H,
    P,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment; prints the run summary as JSON.
    Run { config: PathBuf },
    /// PML error at several resolutions; prints a CSV table and a JSON summary.
    Converge {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Element sizes in km (h mode) or polynomial degrees (p mode).
        #[arg(long, num_args = 1.., required = true)]
        levels: Vec<f64>,
    },
    /// Eigenvalues of the semi-discrete operator as CSV (`re,im`); summary on stderr.
    Spectrum { config: PathBuf },
    /// Operator, energy and time-stepping property checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))
}

fn write_artifact(dir: Option<&str>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(Path::new(dir).join(name), contents)?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let run = run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&run.summary)?);
        }
        Command::Converge { config, mode, levels } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let mode = match mode {
                Mode::H => ConvergenceMode::H,
                Mode::P => ConvergenceMode::P,
            };
            let table = convergence_study(&cfg, mode, &levels)?;
            let csv = table.to_csv();
            let summary = json!({
                "mode": table.mode,
                "observed_order": table.observed_order,
                "ratios": table.ratios,
                "strictly_decreasing": table.strictly_decreasing,
                "notes": table.notes,
            });
            write_artifact(cfg.output_dir.as_deref(), "convergence.csv", &csv)?;
            write_artifact(
                cfg.output_dir.as_deref(),
                "convergence.json",
                &serde_json::to_string_pretty(&table)?,
            )?;
            print!("{csv}");
            eprintln!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Spectrum { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let ctx = cfg.build_context()?;
            let report = spectral_abscissa(&assemble_global_operator(&ctx)?)?;
            let mut csv = String::from("re,im\n");
            for l in &report.eigenvalues {
                csv.push_str(&format!("{:e},{:e}\n", l.re, l.im));
            }
            let summary = json!({
                "dimension": report.dimension,
                "abscissa": report.abscissa,
                "norm": report.norm,
                "residual": report.residual,
                "omega_y": cfg.omega_y,
                "omega_z": cfg.omega_z,
                "d0_per_s": cfg.damping_strength()?.1,
                "damping_mode": cfg.damping_mode,
                "quadrature": cfg.quadrature,
                "degree": cfg.degree,
                "elements": ctx.layout.mesh().counts(),
            });
            write_artifact(cfg.output_dir.as_deref(), "spectrum.csv", &csv)?;
            write_artifact(
                cfg.output_dir.as_deref(),
                "spectrum.json",
                &serde_json::to_string_pretty(&summary)?,
            )?;
            print!("{csv}");
            eprintln!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Selftest { seed } => {
            let results = pmlwave::selftest::run_all(seed)?;
            let mut failed = 0;
            for c in &results {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {:<32} worst {:.3e} (tolerance {:.0e})", c.name, c.worst, c.tolerance);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::Numerical(format!("{failed} self checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
