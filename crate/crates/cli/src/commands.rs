//! Subcommand implementations.  Each returns the process exit code: 0 for
//! success, 1 for numeric non-convergence (outputs are still written), 2 for
//! validation failures.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use qdt_core::analysis::ComparisonTable;
use qdt_core::detector::{detector_distance, ideal_computational_povm, reduce_detector};
use qdt_core::error::QdtError;
use qdt_core::io;
use qdt_core::mitigation::{
    build_response_matrix_crosstalk, mitigate_inversion, mitigate_lsq, MitigationResult,
    ResponseMatrix,
};
use qdt_core::mle::{bootstrap, run_mle, MleConfig};
use qdt_core::simulator::{make_noisy_detector, simulate_qdt_experiment, NoisySpec, QubitNoise};

use crate::report;

/// Exit code for an error: numeric breakdowns get 1, bad input gets 2.
fn classify(e: &QdtError) -> i32 {
    match e {
        QdtError::EigNonConvergence { .. }
        | QdtError::IllConditioned { .. }
        | QdtError::BootstrapTooManyFailures { .. } => 1,
        _ => 2,
    }
}

fn fail(context: &str, e: &QdtError) -> i32 {
    eprintln!("qdt: {context}: {e}");
    classify(e)
}

// -------------------------------------------------------------- simulate --

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of qubits
    #[arg(long)]
    pub qubits: usize,
    /// Shots per circuit
    #[arg(long, default_value_t = 8192)]
    pub shots: u64,
    /// Independent repetitions of the full circuit set
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    /// Base RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output counts file
    #[arg(long)]
    pub out: PathBuf,
    /// Use the perfect computational-basis detector
    #[arg(long, conflicts_with_all = ["povm", "p01", "p10", "tilt_x", "tilt_y"])]
    pub ideal: bool,
    /// Measure through the POVM stored in this file
    #[arg(long, conflicts_with_all = ["p01", "p10", "tilt_x", "tilt_y"])]
    pub povm: Option<PathBuf>,
    /// P(read 1 | prepared 0), applied to every qubit
    #[arg(long, default_value_t = 0.0)]
    pub p01: f64,
    /// P(read 0 | prepared 1), applied to every qubit
    #[arg(long, default_value_t = 0.0)]
    pub p10: f64,
    /// Coherent sigma_x misalignment, applied to every qubit
    #[arg(long, default_value_t = 0.0)]
    pub tilt_x: f64,
    /// Coherent sigma_y misalignment, applied to every qubit
    #[arg(long, default_value_t = 0.0)]
    pub tilt_y: f64,
}

pub fn run_simulate(args: &SimulateArgs) -> i32 {
    if args.qubits == 0 {
        eprintln!("qdt: simulate: --qubits must be at least 1");
        return 2;
    }
    let detector = if let Some(path) = &args.povm {
        match io::read_povm(path) {
            Ok(p) => {
                if p.num_qubits() != args.qubits {
                    eprintln!(
                        "qdt: simulate: POVM in {} has {} qubits, --qubits says {}",
                        path.display(),
                        p.num_qubits(),
                        args.qubits
                    );
                    return 2;
                }
                p
            }
            Err(e) => return fail("simulate", &e),
        }
    } else if args.ideal {
        ideal_computational_povm(args.qubits)
    } else {
        let spec = NoisySpec::uniform(
            args.qubits,
            QubitNoise {
                p01: args.p01,
                p10: args.p10,
                tilt_x: args.tilt_x,
                tilt_y: args.tilt_y,
            },
        );
        match make_noisy_detector(&spec) {
            Ok(p) => p,
            Err(e) => return fail("simulate", &e),
        }
    };

    let dataset = match simulate_qdt_experiment(&detector, args.shots, args.runs, args.seed) {
        Ok(d) => d,
        Err(e) => return fail("simulate", &e),
    };
    if let Err(e) = io::write_counts(&args.out, &dataset) {
        return fail("simulate", &e);
    }
    let circuits: usize = dataset.runs.iter().map(|r| r.circuits.len()).sum();
    println!(
        "wrote {} ({} circuit records, {} shots each)",
        args.out.display(),
        circuits,
        args.shots
    );
    0
}

// ------------------------------------------------------------------ tomo --

#[derive(Args)]
pub struct TomoArgs {
    /// Input counts file
    #[arg(long)]
    pub counts: PathBuf,
    /// Termination threshold on the summed element change per iteration
    #[arg(long, default_value_t = 1e-10)]
    pub epsilon: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,
    /// Output POVM file
    #[arg(long)]
    pub out_povm: PathBuf,
    /// Optional diagnostics file (iterations, trace, audit)
    #[arg(long)]
    pub out_diag: Option<PathBuf>,
}

pub fn run_tomo(args: &TomoArgs) -> i32 {
    let dataset = match io::read_counts(&args.counts) {
        Ok(d) => d,
        Err(e) => return fail("tomo", &e),
    };
    let cfg = MleConfig {
        epsilon: args.epsilon,
        max_iterations: args.max_iters,
        ..MleConfig::default()
    };
    let result = match run_mle(&dataset, &cfg) {
        Ok(r) => r,
        Err(e) => return fail("tomo", &e),
    };
    if let Err(e) = io::write_povm(&args.out_povm, &result.povm) {
        return fail("tomo", &e);
    }
    if let Some(diag) = &args.out_diag {
        if let Err(e) = io::write_diagnostics(diag, &result) {
            return fail("tomo", &e);
        }
    }
    println!(
        "reconstructed {} qubits in {} iterations (final step {:.3e})",
        result.povm.num_qubits(),
        result.iterations,
        result.final_step_norm
    );
    if !result.converged {
        eprintln!(
            "qdt: tomo: iteration cap {} reached before the step norm fell below {:.1e}; results written but flagged",
            args.max_iters, args.epsilon
        );
        return 1;
    }
    0
}

// ---------------------------------------------------------------- reduce --

#[derive(Args)]
pub struct ReduceArgs {
    /// Input POVM file
    #[arg(long)]
    pub povm: PathBuf,
    /// Comma-separated qubit positions to keep, ascending (e.g. "0,2")
    #[arg(long)]
    pub keep: String,
    /// Output POVM file
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_reduce(args: &ReduceArgs) -> i32 {
    let povm = match io::read_povm(&args.povm) {
        Ok(p) => p,
        Err(e) => return fail("reduce", &e),
    };
    let keep: Vec<usize> = match args
        .keep
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect()
    {
        Ok(v) => v,
        Err(_) => {
            eprintln!("qdt: reduce: --keep must be comma-separated qubit indices, got {:?}", args.keep);
            return 2;
        }
    };
    let reduced = match reduce_detector(&povm, &keep) {
        Ok(r) => r,
        Err(e) => return fail("reduce", &e),
    };
    if let Err(e) = io::write_povm(&args.out, &reduced) {
        return fail("reduce", &e);
    }
    println!(
        "kept qubits {:?}: {} -> {} qubits",
        keep,
        povm.num_qubits(),
        reduced.num_qubits()
    );
    0
}

// --------------------------------------------------------------- compare --

#[derive(Args)]
pub struct CompareArgs {
    /// First single-qubit POVM file
    #[arg(long)]
    pub a: PathBuf,
    /// Second single-qubit POVM file
    #[arg(long)]
    pub b: PathBuf,
    /// Statistical fluctuation floor recorded with the result
    #[arg(long, default_value_t = 1e-3)]
    pub floor: f64,
    /// Optional one-entry comparison-table file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_compare(args: &CompareArgs) -> i32 {
    let a = match io::read_povm(&args.a) {
        Ok(p) => p,
        Err(e) => return fail("compare", &e),
    };
    let b = match io::read_povm(&args.b) {
        Ok(p) => p,
        Err(e) => return fail("compare", &e),
    };
    let d = match detector_distance(&a, &b) {
        Ok(d) => d,
        Err(e) => return fail("compare", &e),
    };
    println!("distance {d:.6}");
    if let Some(out) = &args.out {
        let table = ComparisonTable {
            rows: vec![0],
            cols: vec![None],
            distances: vec![vec![Some(d)]],
            fluctuation_scale: args.floor,
        };
        if let Err(e) = io::write_table(out, &table) {
            return fail("compare", &e);
        }
    }
    0
}

// -------------------------------------------------------------- mitigate --

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Invert the response matrix, clip negatives, renormalize
    Inversion,
    /// Least squares constrained to the probability simplex
    Lsq,
}

#[derive(Args)]
pub struct MitigateArgs {
    /// POVM file (the response matrix is built from its identity/sigma_z
    /// coefficients) or a stored response-matrix file
    #[arg(long)]
    pub matrix_from: PathBuf,
    /// Measured distribution file
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Lsq)]
    pub method: Method,
    /// Least-squares termination threshold (projected-gradient norm)
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Least-squares iteration cap
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Output corrected-distribution file
    #[arg(long)]
    pub out: PathBuf,
    /// Also store the response matrix used
    #[arg(long)]
    pub out_matrix: Option<PathBuf>,
}

/// Loads a response matrix from either of the two file kinds, dispatching
/// on the schema tag.
fn load_matrix(path: &PathBuf) -> Result<ResponseMatrix, QdtError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(io::RMATRIX_SCHEMA) => io::read_response_matrix(path),
        Some(io::POVM_SCHEMA) => build_response_matrix_crosstalk(&io::read_povm(path)?),
        other => Err(QdtError::SchemaMismatch {
            expected: format!("{} or {}", io::POVM_SCHEMA, io::RMATRIX_SCHEMA),
            found: other.unwrap_or("absent").to_string(),
        }),
    }
}

pub fn run_mitigate(args: &MitigateArgs) -> i32 {
    let matrix = match load_matrix(&args.matrix_from) {
        Ok(m) => m,
        Err(e) => return fail("mitigate", &e),
    };
    let (num_qubits, p_tilde) = match io::read_distribution(&args.dist) {
        Ok(d) => d,
        Err(e) => return fail("mitigate", &e),
    };
    if num_qubits != matrix.num_qubits() {
        eprintln!(
            "qdt: mitigate: distribution has {} qubits but the matrix has {}",
            num_qubits,
            matrix.num_qubits()
        );
        return 2;
    }
    if matrix.excluded_weight > 0.1 {
        eprintln!(
            "qdt: mitigate: warning: the detector carries {:.3} total x/y-coefficient weight the response matrix cannot represent",
            matrix.excluded_weight
        );
    }
    let result: MitigationResult = match args.method {
        Method::Inversion => match mitigate_inversion(&matrix, &p_tilde) {
            Ok(r) => r,
            Err(e) => return fail("mitigate", &e),
        },
        Method::Lsq => match mitigate_lsq(&matrix, &p_tilde, args.tol, args.max_iters) {
            Ok(r) => r,
            Err(e) => return fail("mitigate", &e),
        },
    };
    if let Err(e) = io::write_distribution(&args.out, num_qubits, &result.corrected) {
        return fail("mitigate", &e);
    }
    if let Some(out_matrix) = &args.out_matrix {
        if let Err(e) = io::write_response_matrix(out_matrix, &matrix) {
            return fail("mitigate", &e);
        }
    }
    println!(
        "residual {:.3e} after {} iterations",
        result.residual, result.iterations
    );
    if !result.converged {
        eprintln!(
            "qdt: mitigate: stopped at the iteration cap with projected gradient {:.3e} > {:.1e}; result written but flagged",
            result.projected_gradient_norm, args.tol
        );
        return 1;
    }
    0
}

// ------------------------------------------------------------- bootstrap --

#[derive(Args)]
pub struct BootstrapArgs {
    /// Input counts file (needs at least 2 runs)
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output spread-report file
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_bootstrap(args: &BootstrapArgs) -> i32 {
    let dataset = match io::read_counts(&args.counts) {
        Ok(d) => d,
        Err(e) => return fail("bootstrap", &e),
    };
    let report = match bootstrap(&dataset, args.resamples, args.seed, &MleConfig::default()) {
        Ok(r) => r,
        Err(e) => return fail("bootstrap", &e),
    };
    if let Err(e) = io::write_bootstrap(&args.out, &report) {
        return fail("bootstrap", &e);
    }
    println!(
        "{} resamples ({} failed to converge)",
        report.num_resamples, report.num_failed
    );
    0
}

// ---------------------------------------------------------------- report --

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Svg,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Input POVM file
    #[arg(long)]
    pub povm: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_report(args: &ReportArgs) -> i32 {
    let povm = match io::read_povm(&args.povm) {
        Ok(p) => p,
        Err(e) => return fail("report", &e),
    };
    let rendered = match args.format {
        Format::Json => {
            // JSON report == the POVM file format itself, so a report can be
            // fed back into any command that takes a POVM.
            match args.out.as_ref() {
                Some(path) => {
                    return match io::write_povm(path, &povm) {
                        Ok(()) => 0,
                        Err(e) => fail("report", &e),
                    };
                }
                None => match serde_json::to_string_pretty(&serde_json::json!({
                    "schema": io::POVM_SCHEMA,
                    "num_qubits": povm.num_qubits(),
                    "elements": povm
                        .iter()
                        .map(|(bits, t)| (bits.clone(), t.coeffs().to_vec()))
                        .collect::<std::collections::BTreeMap<_, _>>(),
                })) {
                    Ok(s) => s + "\n",
                    Err(e) => return fail("report", &QdtError::Json(e)),
                },
            }
        }
        Format::Text => match report::render_text(&povm) {
            Ok(s) => s,
            Err(e) => return fail("report", &e),
        },
        Format::Svg => {
            let (svg, warnings) = match report::render_svg(&povm) {
                Ok(r) => r,
                Err(e) => return fail("report", &e),
            };
            for w in warnings {
                eprintln!("qdt: report: warning: {w}");
            }
            svg
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                return fail("report", &QdtError::Io(e));
            }
        }
        None => print!("{rendered}"),
    }
    0
}
