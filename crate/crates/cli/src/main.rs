//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 when the scenario fails validation, 3 when a
//! validated scenario fails at runtime.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use starris_cli::scenario::{parse_scenario, EXPERIMENT_KINDS};
use starris_cli::execute;

#[derive(Parser)]
#[command(
    name = "starris",
    about = "Green's-function channel model sweeps for metasurface RISs and STAR-RISs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its outputs.
    Run {
        /// Scenario file (TOML with unit-suffixed quantities).
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the quadrature density (samples per wavelength).
        #[arg(long)]
        quadrature_density: Option<f64>,
        /// Override the magnitude of the coupling prefactor beta.
        #[arg(long)]
        beta_magnitude: Option<f64>,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        scenario: PathBuf,
    },
    /// List the available experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for kind in EXPERIMENT_KINDS {
                println!("{kind}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match parse_scenario(&scenario) {
            Ok(config) => {
                println!("ok: {}", config.experiment.kind_name());
                ExitCode::SUCCESS
            }
            Err(errors) => {
                for e in &errors {
                    eprintln!("{}: {e}", scenario.display());
                }
                ExitCode::from(2)
            }
        },
        Command::Run { scenario, out, seed, quadrature_density, beta_magnitude } => {
            let mut config = match parse_scenario(&scenario) {
                Ok(c) => c,
                Err(errors) => {
                    for e in &errors {
                        eprintln!("{}: {e}", scenario.display());
                    }
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(density) = quadrature_density {
                if density <= 0.0 {
                    eprintln!("--quadrature-density must be positive");
                    return ExitCode::from(2);
                }
                config.samples_per_wavelength = density;
            }
            if let Some(beta) = beta_magnitude {
                if beta <= 0.0 {
                    eprintln!("--beta-magnitude must be positive");
                    return ExitCode::from(2);
                }
                config.beta_magnitude = Some(beta);
            }
            let bytes = match std::fs::read(&scenario) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", scenario.display());
                    return ExitCode::from(2);
                }
            };
            match execute(&config, &bytes, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {e}", scenario.display());
                    ExitCode::from(3)
                }
            }
        }
    }
}
