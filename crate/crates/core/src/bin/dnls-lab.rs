use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnls_lab::harness::experiment::write_failure_manifest;
use dnls_lab::harness::{run_experiment, ExperimentConfig, ExperimentKind, Overrides};

/// Run DNLS experiments and write CSV artifacts plus `manifest.json`.
#[derive(Parser, Debug)]
#[command(name = "dnls-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML config; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Evolve and record diagnostics.
    Simulate,
    /// Fit decay exponents of ‖u‖∞, ‖u_x‖∞ and growth of ‖Lu‖₂.
    DecayScan,
    /// Decay scan plus wave-packet profiles, approximation ratios and remainder.
    PacketTest,
    /// Soliton propagation, localization and smallness checks.
    SolitonTest,
    /// Exact free evolution.
    LinearBaseline,
}

impl From<Command> for ExperimentKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => ExperimentKind::Simulate,
            Command::DecayScan => ExperimentKind::DecayScan,
            Command::PacketTest => ExperimentKind::PacketTest,
            Command::SolitonTest => ExperimentKind::SolitonTest,
            Command::LinearBaseline => ExperimentKind::LinearBaseline,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        kind: Some(cli.command.into()),
        epsilon: cli.epsilon,
        theta: cli.theta,
        t_end: cli.t_end,
        n: cli.n.map(|n| n as usize),
        seed: cli.seed,
        output_dir: cli.out.clone(),
    };
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::from_toml_str("", &overrides),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    log::info!("running {} into {}", config.kind.name(), config.output_dir.display());
    let manifest = match run_experiment(&config) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            if let Ok(path) = write_failure_manifest(&config, &e) {
                eprintln!("wrote {}", path.display());
            }
            return ExitCode::from(1);
        }
    };
    for f in &manifest.fits {
        println!(
            "fit {:<24} exponent {:+.5}  constant {:.5e}  r2 {:.5}",
            f.quantity, f.exponent, f.constant, f.r_squared
        );
    }
    for c in &manifest.checks {
        println!(
            "{} {:<44} {:.6e} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.condition
        );
    }
    for e in &manifest.errors {
        eprintln!("error: {e}");
    }
    println!("manifest: {}", config.output_dir.join("manifest.json").display());
    ExitCode::from(manifest.exit_code() as u8)
}
