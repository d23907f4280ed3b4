use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convex_scatter::commands;

#[derive(Parser)]
#[command(name = "convex-scatter", version, about = "Coefficient reconstruction from backscatter Cauchy data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate clean and noisy Cauchy data for a scenario.
    Simulate {
        /// Built-in scenario name or path to a TOML scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Noise seed, overriding the scenario's.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Reconstruct the coefficient from a data file.
    Invert {
        #[arg(long)]
        data: PathBuf,
        /// Scenario file or bare inversion table; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Drop the Carleman weight and run the fixed-length loop.
        #[arg(long)]
        no_carleman: bool,
    },
    /// Run the built-in oracle checks.
    Validate,
    /// Write a cross-section and a heatmap table for a coefficient file.
    Export {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, default_value_t = 0.45)]
        row: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> convex_scatter::error::Result<ExitCode> {
    match cli.command {
        Command::Simulate { scenario, out, seed } => {
            for f in commands::simulate(&scenario, &out, seed)? {
                println!("wrote {}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Invert { data, config, out, no_carleman } => {
            let inv = commands::invert(&data, config.as_deref(), &out, no_carleman)?;
            let s = &inv.summary;
            println!(
                "converged {} after {} iterates; max a = {} at ({}, {}) from iterate {}",
                s.converged, s.iterations, s.max_value, s.max_x1, s.max_x2, s.selected_iterate
            );
            Ok(if s.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Validate => {
            let checks = commands::validate()?;
            for c in &checks {
                println!("{c}");
            }
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Export { result, row, out } => {
            let e = commands::export(&result, row, out.as_deref())?;
            println!("row {} (x2 = {})", e.row.row, e.row.x2);
            println!("wrote {}", e.section.display());
            println!("wrote {}", e.heatmap.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
