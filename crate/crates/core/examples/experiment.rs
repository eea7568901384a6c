//! Runs a TOML experiment and prints its checks.
//!
//! `cargo run --example experiment -- configs/ising_torus.toml out/`

use hcp::speckit::{run_experiment, ExperimentConfig};
use std::path::PathBuf;

fn main() -> hcp::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ising_torus.toml").into()));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hcp-example"));
    let report = run_experiment(&ExperimentConfig::load(&config)?, &out, None)?;
    for c in &report.checks {
        println!("{} {} = {:.3e} (≤ {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    println!("outputs in {}", out.display());
    Ok(())
}
