//! Runs an experiment manifest and writes its result files.
//!
//! ```bash
//! cargo run --release --example experiment_config -- configs/nash_k20.toml out/
//! ```
//!
//! Without arguments the bundled UCB manifest runs and the files are printed.

use std::path::PathBuf;

use cogmac::harness::{emit_results, render, run_experiment, ExperimentConfig, Overrides};

const DEFAULT: &str = include_str!("../configs/ucb_two_channels.toml");

fn main() -> cogmac::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = match args.next() {
        Some(path) => ExperimentConfig::from_path(PathBuf::from(path).as_path(), &Overrides::default())?,
        None => ExperimentConfig::from_toml_str(DEFAULT, &Overrides { slots: Some(200), ..Overrides::default() })?,
    };
    let stats = run_experiment(&config)?;
    match args.next() {
        Some(dir) => {
            for path in emit_results(&stats, &config.outputs, config.format, PathBuf::from(dir).as_path())? {
                println!("wrote {}", path.display());
            }
        }
        None => {
            for (name, text) in render(&stats, &config.outputs, config.format) {
                let head: Vec<&str> = text.lines().take(8).collect();
                println!("== {name}\n{}\n", head.join("\n"));
            }
        }
    }
    Ok(())
}
