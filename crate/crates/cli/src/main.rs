//! `qdt` — simulate, reconstruct, compare, and correct qubit readout.
//!
//! Exit codes: 0 on success; 1 when a numeric procedure failed to converge
//! (any results produced so far are still written, flagged as such); 2 on
//! input or flag validation failure.

mod commands;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "qdt",
    version,
    about = "Detector tomography and readout-error mitigation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tomography dataset from a detector model
    Simulate(commands::SimulateArgs),
    /// Reconstruct a POVM from a counts file by maximum likelihood
    Tomo(commands::TomoArgs),
    /// Reduce a multi-qubit POVM to a subset of its qubits
    Reduce(commands::ReduceArgs),
    /// Distance between two single-qubit detectors
    Compare(commands::CompareArgs),
    /// Correct a measured distribution through a response matrix
    Mitigate(commands::MitigateArgs),
    /// Bootstrap coefficient spreads from a counts file
    Bootstrap(commands::BootstrapArgs),
    /// Render a POVM as a parameter table, JSON, or detector-sphere SVG
    Report(commands::ReportArgs),
}

/// Applies the QDT_THREADS cap before any parallel work starts.
fn init_threads() -> Result<(), String> {
    match std::env::var("QDT_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| format!("QDT_THREADS must be an integer >= 1, got {raw:?}"))?;
            if n == 0 {
                return Err("QDT_THREADS must be an integer >= 1".into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| format!("could not configure {n} worker threads: {e}"))
        }
    }
}

fn main() {
    if let Err(msg) = init_threads() {
        eprintln!("qdt: {msg}");
        std::process::exit(2);
    }
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate(args) => commands::run_simulate(&args),
        Command::Tomo(args) => commands::run_tomo(&args),
        Command::Reduce(args) => commands::run_reduce(&args),
        Command::Compare(args) => commands::run_compare(&args),
        Command::Mitigate(args) => commands::run_mitigate(&args),
        Command::Bootstrap(args) => commands::run_bootstrap(&args),
        Command::Report(args) => commands::run_report(&args),
    };
    std::process::exit(code);
}
