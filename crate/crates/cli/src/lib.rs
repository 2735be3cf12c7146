//! Scenario-file-driven front end for the surface channel model: parse a
//! TOML scenario, run its experiment, and emit CSV tables and coverage
//! rasters plus a run manifest.

pub mod experiments;
pub mod output;
pub mod scenario;
pub mod units;

use std::path::{Path, PathBuf};

use experiments::{run_experiment, RunError};
use output::{fnv1a_hash, write_outputs, OutputFile};
use scenario::ScenarioConfig;

/// Execute a validated scenario: run the experiment, then write its outputs
/// and a manifest recording the configuration hash, library version, and
/// seed. Files are written atomically, so a failing run leaves no partial
/// outputs.
pub fn execute(
    config: &ScenarioConfig,
    config_bytes: &[u8],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, RunError> {
    let mut files = run_experiment(config)?;

    let mut manifest = String::new();
    manifest.push_str(&format!("config_hash: {:016x}\n", fnv1a_hash(config_bytes)));
    manifest.push_str(&format!("library_version: {}\n", env!("CARGO_PKG_VERSION")));
    manifest.push_str(&format!("experiment: {}\n", config.experiment.kind_name()));
    manifest.push_str(&format!("seed: {}\n", config.seed));
    manifest.push_str(&format!(
        "samples_per_wavelength: {}\n",
        config.samples_per_wavelength
    ));
    if let Some(beta) = config.beta_magnitude {
        manifest.push_str(&format!("beta_magnitude: {beta:e}\n"));
    }
    manifest.push_str("outputs:\n");
    for f in &files {
        manifest.push_str(&format!("  {}\n", f.name));
    }
    files.push(OutputFile {
        name: format!("{}_manifest.txt", config.output_prefix),
        contents: manifest,
    });

    Ok(write_outputs(out_dir, &files)?)
}
