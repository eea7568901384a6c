use clap::{Parser, Subcommand};
use hcp::speckit::{compare_laplace_tables, parse_laplace_csv, run_experiment, ExperimentConfig};
use hcp::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hcp", version, about = "Hierarchical coalescence process experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and JSON outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides both the file and the HCP_SEED environment variable.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory; defaults to `output_dir` from the config, then `hcp-out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sup distance per epoch between two Laplace CSV files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
    /// List the built-in models, interval laws and schedules.
    Presets,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, seed, workers, out } => {
            let config = load(&config, seed)?;
            let out = out.or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("hcp-out"));
            let report = run_experiment(&config, &out, workers)?;
            for check in &report.checks {
                let mark = if check.passed { "PASS" } else { "FAIL" };
                println!("{mark} {} = {:.3e} (tolerance {:.3e})", check.name, check.value, check.tolerance);
            }
            for u in &report.unavailable {
                println!("unavailable: {u}");
            }
            println!("wrote {} files to {}", report.files.len(), out.display());
            Ok(report.passed)
        }
        Command::Validate { config } => {
            let config = load(&config, None)?;
            let schedule = config.schedule()?;
            let spec = config.model.rate_spec(1, &schedule)?;
            println!("ok: {} epochs of {}, case {:?}, first point {:?}", config.epochs, config.model.name(), spec.case(), spec.leftmost_case());
            Ok(true)
        }
        Command::Compare { a, b, tol } => {
            let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
            let ta = parse_laplace_csv(&read(&a)?)?;
            let tb = parse_laplace_csv(&read(&b)?)?;
            let mut ok = true;
            for (epoch, d) in compare_laplace_tables(&ta, &tb)? {
                ok &= d <= tol;
                println!("epoch {epoch}: sup |Δ| = {d:.3e}{}", if d <= tol { "" } else { "  exceeds tolerance" });
            }
            Ok(ok)
        }
        Command::Presets => {
            println!("models: east, paste_all, ising_t0, custom");
            println!("interval laws: delta, geometric, zeta_tail, truncated_pareto, custom");
            println!("schedules: linear, east, geometric (a in (1, 2]), explicit");
            println!("topologies: torus, half_line");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
