//! Versioned JSON file formats.
//!
//! Every file begins with a `"schema"` tag (`qdt-counts/1`, `qdt-povm/1`,
//! ...) so readers can fail fast on the wrong kind of input.  All maps are
//! ordered (BTreeMap) and floats use serde_json's shortest round-trip
//! encoding, which makes emitted files byte-stable across runs and parses
//! back to bit-identical values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::ComparisonTable;
use crate::detector::DetectorPovm;
use crate::error::{QdtError, Result};
use crate::mitigation::ResponseMatrix;
use crate::mle::{BootstrapReport, MleAudit, MleResult};
use crate::simulator::{CircuitRecord, CountsDataset, Run};
use crate::tensor::PauliCoeffTensor;

pub const COUNTS_SCHEMA: &str = "qdt-counts/1";
pub const POVM_SCHEMA: &str = "qdt-povm/1";
pub const DIST_SCHEMA: &str = "qdt-dist/1";
pub const DIAG_SCHEMA: &str = "qdt-diag/1";
pub const TABLE_SCHEMA: &str = "qdt-table/1";
pub const RMATRIX_SCHEMA: &str = "qdt-rmatrix/1";
pub const BOOTSTRAP_SCHEMA: &str = "qdt-bootstrap/1";

fn check_schema(found: &str, expected: &'static str) -> Result<()> {
    if found != expected {
        return Err(QdtError::SchemaMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------- counts --

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    state: String,
    counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct RunFile {
    circuits: Vec<CircuitFile>,
}

#[derive(Serialize, Deserialize)]
struct CountsFile {
    schema: String,
    num_qubits: usize,
    shots: u64,
    runs: Vec<RunFile>,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

pub fn write_counts(path: &Path, dataset: &CountsDataset) -> Result<()> {
    let file = CountsFile {
        schema: COUNTS_SCHEMA.to_string(),
        num_qubits: dataset.num_qubits,
        shots: dataset.shots_per_circuit,
        runs: dataset
            .runs
            .iter()
            .map(|run| RunFile {
                circuits: run
                    .circuits
                    .iter()
                    .map(|c| CircuitFile {
                        state: c.state.clone(),
                        counts: c.counts.clone(),
                    })
                    .collect(),
            })
            .collect(),
        seed: dataset.seed,
        metadata: dataset.metadata.clone(),
    };
    write_json(path, &file)
}

/// Reads and structurally validates a counts dataset.
pub fn read_counts(path: &Path) -> Result<CountsDataset> {
    let file: CountsFile = read_json(path)?;
    check_schema(&file.schema, COUNTS_SCHEMA)?;
    let dataset = CountsDataset {
        num_qubits: file.num_qubits,
        shots_per_circuit: file.shots,
        runs: file
            .runs
            .into_iter()
            .map(|run| Run {
                circuits: run
                    .circuits
                    .into_iter()
                    .map(|c| CircuitRecord {
                        state: c.state,
                        counts: c.counts,
                    })
                    .collect(),
            })
            .collect(),
        seed: file.seed,
        metadata: file.metadata,
    };
    dataset.validate()?;
    Ok(dataset)
}

// ------------------------------------------------------------------ povm --

#[derive(Serialize, Deserialize)]
struct PovmFile {
    schema: String,
    num_qubits: usize,
    elements: BTreeMap<String, Vec<f64>>,
}

pub fn write_povm(path: &Path, povm: &DetectorPovm) -> Result<()> {
    let file = PovmFile {
        schema: POVM_SCHEMA.to_string(),
        num_qubits: povm.num_qubits(),
        elements: povm
            .iter()
            .map(|(bits, t)| (bits.clone(), t.coeffs().to_vec()))
            .collect(),
    };
    write_json(path, &file)
}

/// Reads a POVM file.  Structure (outcome set, coefficient counts) is
/// enforced; numeric validity is the caller's decision, so files holding
/// intermediate or deliberately-imperfect detectors stay readable.
pub fn read_povm(path: &Path) -> Result<DetectorPovm> {
    let file: PovmFile = read_json(path)?;
    check_schema(&file.schema, POVM_SCHEMA)?;
    let mut elements = BTreeMap::new();
    for (bits, coeffs) in file.elements {
        elements.insert(bits, PauliCoeffTensor::new(file.num_qubits, coeffs)?);
    }
    DetectorPovm::new(file.num_qubits, elements)
}

// ------------------------------------------------------------ distribution --

#[derive(Serialize, Deserialize)]
struct DistFile {
    schema: String,
    num_qubits: usize,
    probabilities: BTreeMap<String, f64>,
}

/// Writes a distribution over bitstring outcomes (canonical index order).
/// Exact zeros are omitted; absent keys mean zero.
pub fn write_distribution(path: &Path, num_qubits: usize, probabilities: &[f64]) -> Result<()> {
    let names = crate::detector::bitstrings(num_qubits);
    if probabilities.len() != names.len() {
        return Err(QdtError::WrongElementCount {
            expected: names.len(),
            found: probabilities.len(),
        });
    }
    let file = DistFile {
        schema: DIST_SCHEMA.to_string(),
        num_qubits,
        probabilities: names
            .into_iter()
            .zip(probabilities)
            .filter(|(_, &p)| p != 0.0)
            .map(|(n, &p)| (n, p))
            .collect(),
    };
    write_json(path, &file)
}

/// Reads a distribution into a dense canonical-order vector.
pub fn read_distribution(path: &Path) -> Result<(usize, Vec<f64>)> {
    let file: DistFile = read_json(path)?;
    check_schema(&file.schema, DIST_SCHEMA)?;
    let dim = 1usize << file.num_qubits;
    let mut dense = vec![0.0f64; dim];
    for (bits, p) in file.probabilities {
        if bits.len() != file.num_qubits {
            return Err(QdtError::BadBitstring(bits));
        }
        let index = crate::detector::bits_to_index(&bits)?;
        if !p.is_finite() {
            return Err(QdtError::BadDistribution(format!(
                "non-finite probability for outcome {bits}"
            )));
        }
        dense[index] = p;
    }
    Ok((file.num_qubits, dense))
}

// ----------------------------------------------------------------- table --

#[derive(Serialize, Deserialize)]
struct TableFile {
    schema: String,
    rows: Vec<usize>,
    /// Column labels: a qubit index, or the string "parallel" for the
    /// single-column comparison against a parallel run.
    cols: Vec<serde_json::Value>,
    distances: Vec<Vec<Option<f64>>>,
    floor: f64,
}

pub fn write_table(path: &Path, table: &ComparisonTable) -> Result<()> {
    let file = TableFile {
        schema: TABLE_SCHEMA.to_string(),
        rows: table.rows.clone(),
        cols: table
            .cols
            .iter()
            .map(|c| match c {
                Some(j) => serde_json::Value::from(*j),
                None => serde_json::Value::from("parallel"),
            })
            .collect(),
        distances: table.distances.clone(),
        floor: table.fluctuation_scale,
    };
    write_json(path, &file)
}

pub fn read_table(path: &Path) -> Result<ComparisonTable> {
    let file: TableFile = read_json(path)?;
    check_schema(&file.schema, TABLE_SCHEMA)?;
    let mut cols = Vec::with_capacity(file.cols.len());
    for value in &file.cols {
        match value {
            serde_json::Value::Number(n) => {
                let j = n.as_u64().ok_or_else(|| {
                    QdtError::BadDataset(format!("column label {n} is not a qubit index"))
                })?;
                cols.push(Some(j as usize));
            }
            serde_json::Value::String(s) if s == "parallel" => cols.push(None),
            other => {
                return Err(QdtError::BadDataset(format!(
                    "unrecognized column label {other}"
                )))
            }
        }
    }
    if file.distances.len() != file.rows.len()
        || file.distances.iter().any(|row| row.len() != cols.len())
    {
        return Err(QdtError::BadDataset(
            "distance grid does not match row/column labels".into(),
        ));
    }
    Ok(ComparisonTable {
        rows: file.rows,
        cols,
        distances: file.distances,
        fluctuation_scale: file.floor,
    })
}

// ------------------------------------------------------- response matrix --

#[derive(Serialize, Deserialize)]
struct RMatrixFile {
    schema: String,
    num_qubits: usize,
    /// Index legend: bitstring labeling each row/column position.
    bitstrings: Vec<String>,
    /// Dense row-major entries; rows = observed, columns = ideal.
    matrix: Vec<Vec<f64>>,
    #[serde(default)]
    excluded_weight: f64,
}

pub fn write_response_matrix(path: &Path, m: &ResponseMatrix) -> Result<()> {
    let d = m.dim();
    let file = RMatrixFile {
        schema: RMATRIX_SCHEMA.to_string(),
        num_qubits: m.num_qubits(),
        bitstrings: crate::detector::bitstrings(m.num_qubits()),
        matrix: (0..d)
            .map(|r| m.entries()[r * d..(r + 1) * d].to_vec())
            .collect(),
        excluded_weight: m.excluded_weight,
    };
    write_json(path, &file)
}

pub fn read_response_matrix(path: &Path) -> Result<ResponseMatrix> {
    let file: RMatrixFile = read_json(path)?;
    check_schema(&file.schema, RMATRIX_SCHEMA)?;
    let d = 1usize << file.num_qubits;
    if file.bitstrings != crate::detector::bitstrings(file.num_qubits) {
        return Err(QdtError::BadDataset(
            "bitstring legend is not in canonical order".into(),
        ));
    }
    if file.matrix.len() != d || file.matrix.iter().any(|row| row.len() != d) {
        return Err(QdtError::BadDataset(format!(
            "response matrix is not {d} x {d}"
        )));
    }
    ResponseMatrix::from_parts(
        file.num_qubits,
        file.matrix.into_iter().flatten().collect(),
        file.excluded_weight,
    )
}

// ----------------------------------------------------------- diagnostics --

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct AuditFile {
    pub max_completeness_residual: f64,
    pub min_eigenvalue: f64,
    pub max_likelihood_decrease: f64,
    pub max_s_asymmetry: f64,
}

impl From<&MleAudit> for AuditFile {
    fn from(a: &MleAudit) -> Self {
        AuditFile {
            max_completeness_residual: a.max_completeness_residual,
            min_eigenvalue: a.min_eigenvalue,
            max_likelihood_decrease: a.max_likelihood_decrease,
            max_s_asymmetry: a.max_s_asymmetry,
        }
    }
}

/// Reconstruction diagnostics: everything about an MLE run except the POVM
/// itself (which goes in its own file).
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct DiagnosticsFile {
    schema: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_step_norm: f64,
    pub log_likelihood_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditFile>,
}

pub fn write_diagnostics(path: &Path, result: &MleResult) -> Result<()> {
    let file = DiagnosticsFile {
        schema: DIAG_SCHEMA.to_string(),
        iterations: result.iterations,
        converged: result.converged,
        final_step_norm: result.final_step_norm,
        log_likelihood_trace: result.log_likelihood_trace.clone(),
        audit: result.audit.as_ref().map(AuditFile::from),
    };
    write_json(path, &file)
}

pub fn read_diagnostics(path: &Path) -> Result<DiagnosticsFile> {
    let file: DiagnosticsFile = read_json(path)?;
    check_schema(&file.schema, DIAG_SCHEMA)?;
    Ok(file)
}

// ------------------------------------------------------------- bootstrap --

#[derive(Serialize, Deserialize)]
struct BootstrapFile {
    schema: String,
    num_resamples: usize,
    num_failed: usize,
    std_devs: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audit: Option<AuditFile>,
}

pub fn write_bootstrap(path: &Path, report: &BootstrapReport) -> Result<()> {
    let file = BootstrapFile {
        schema: BOOTSTRAP_SCHEMA.to_string(),
        num_resamples: report.num_resamples,
        num_failed: report.num_failed,
        std_devs: report.std_devs.clone(),
        audit: report.audit.as_ref().map(AuditFile::from),
    };
    write_json(path, &file)
}

pub fn read_bootstrap(path: &Path) -> Result<BootstrapReport> {
    let file: BootstrapFile = read_json(path)?;
    check_schema(&file.schema, BOOTSTRAP_SCHEMA)?;
    Ok(BootstrapReport {
        std_devs: file.std_devs,
        num_resamples: file.num_resamples,
        num_failed: file.num_failed,
        audit: file.audit.map(|a| MleAudit {
            max_completeness_residual: a.max_completeness_residual,
            min_eigenvalue: a.min_eigenvalue,
            max_likelihood_decrease: a.max_likelihood_decrease,
            max_s_asymmetry: a.max_s_asymmetry,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{ideal_computational_povm, AVector};
    use crate::simulator::{simulate_qdt_experiment, NoisySpec, QubitNoise};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn counts_round_trip_is_bit_exact() {
        let dir = tmp();
        let p = crate::simulator::make_noisy_detector(&NoisySpec::uniform(
            1,
            QubitNoise {
                p01: 0.1,
                p10: 0.05,
                tilt_x: 0.01,
                tilt_y: 0.0,
            },
        ))
        .unwrap();
        let dataset = simulate_qdt_experiment(&p, 256, 3, 99).unwrap();
        let path = dir.path().join("counts.json");
        write_counts(&path, &dataset).unwrap();
        let back = read_counts(&path).unwrap();
        assert_eq!(dataset, back);

        // Re-serialization must be byte-identical.
        let again = dir.path().join("counts2.json");
        write_counts(&again, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn counts_schema_tag_is_checked() {
        let dir = tmp();
        let path = dir.path().join("x.json");
        fs::write(
            &path,
            r#"{"schema": "qdt-povm/1", "num_qubits": 1, "shots": 1, "runs": []}"#,
        )
        .unwrap();
        assert!(matches!(
            read_counts(&path),
            Err(QdtError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn malformed_json_surfaces_parse_error() {
        let dir = tmp();
        let path = dir.path().join("x.json");
        fs::write(&path, "{\"schema\": \"qdt-counts/1\",").unwrap();
        assert!(matches!(read_counts(&path), Err(QdtError::Json(_))));
    }

    #[test]
    fn corrupt_counts_fail_validation_on_read() {
        let dir = tmp();
        let path = dir.path().join("x.json");
        // One circuit whose counts do not sum to the declared shots.
        fs::write(
            &path,
            r#"{
  "schema": "qdt-counts/1",
  "num_qubits": 1,
  "shots": 10,
  "runs": [{"circuits": [
    {"state": "0", "counts": {"0": 4}},
    {"state": "1", "counts": {"1": 10}},
    {"state": "+", "counts": {"0": 5, "1": 5}},
    {"state": "-", "counts": {"0": 5, "1": 5}},
    {"state": "+i", "counts": {"0": 5, "1": 5}},
    {"state": "-i", "counts": {"0": 5, "1": 5}}
  ]}],
  "seed": 1
}"#,
        )
        .unwrap();
        assert!(matches!(read_counts(&path), Err(QdtError::BadDataset(_))));
    }

    #[test]
    fn povm_round_trip_preserves_every_bit() {
        let dir = tmp();
        // Awkward floats that expose any lossy encoding.
        let a = AVector::new(1.0 / 3.0, 0.05 * (2f64).sqrt() / 3.0, 1e-17, 0.23456789012345678);
        let povm = DetectorPovm::from_avector(a);
        let path = dir.path().join("povm.json");
        write_povm(&path, &povm).unwrap();
        let back = read_povm(&path).unwrap();
        for (bits, t) in povm.iter() {
            let rt = back.element(bits).unwrap();
            for (x, y) in t.coeffs().iter().zip(rt.coeffs()) {
                assert_eq!(x.to_bits(), y.to_bits(), "{bits} coefficient drifted");
            }
        }
    }

    #[test]
    fn distribution_omits_zeros_and_reads_them_back() {
        let dir = tmp();
        let path = dir.path().join("dist.json");
        write_distribution(&path, 2, &[0.5, 0.0, 0.25, 0.25]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(!text.contains("\"01\""), "exact zero should be omitted");
        let (n, dense) = read_distribution(&path).unwrap();
        assert_eq!(n, 2);
        assert_eq!(dense, vec![0.5, 0.0, 0.25, 0.25]);
    }

    #[test]
    fn distribution_rejects_wrong_length_bitstrings() {
        let dir = tmp();
        let path = dir.path().join("dist.json");
        fs::write(
            &path,
            r#"{"schema": "qdt-dist/1", "num_qubits": 2, "probabilities": {"000": 1.0}}"#,
        )
        .unwrap();
        assert!(matches!(
            read_distribution(&path),
            Err(QdtError::BadBitstring(_))
        ));
    }

    #[test]
    fn table_round_trip_with_parallel_column_and_diagonal_holes() {
        let dir = tmp();
        let square = ComparisonTable {
            rows: vec![0, 1],
            cols: vec![Some(0), Some(1)],
            distances: vec![vec![None, Some(0.011)], vec![Some(0.087), None]],
            fluctuation_scale: 2e-3,
        };
        let path = dir.path().join("table.json");
        write_table(&path, &square).unwrap();
        assert_eq!(read_table(&path).unwrap(), square);
        assert!(fs::read_to_string(&path).unwrap().contains("null"));

        let column = ComparisonTable {
            rows: vec![0, 1],
            cols: vec![None],
            distances: vec![vec![Some(0.042)], vec![Some(0.017)]],
            fluctuation_scale: 1e-3,
        };
        let path2 = dir.path().join("column.json");
        write_table(&path2, &column).unwrap();
        assert_eq!(read_table(&path2).unwrap(), column);
        assert!(fs::read_to_string(&path2).unwrap().contains("parallel"));
    }

    #[test]
    fn response_matrix_round_trip_and_column_check() {
        let dir = tmp();
        let a = AVector::new(0.52, 0.0, 0.0, 0.44);
        let m = crate::mitigation::build_response_matrix(&[(a, a.complement())]).unwrap();
        let path = dir.path().join("m.json");
        write_response_matrix(&path, &m).unwrap();
        let back = read_response_matrix(&path).unwrap();
        assert_eq!(m, back);

        // Break a column sum and watch the reader refuse.
        let bad = dir.path().join("bad.json");
        fs::write(
            &bad,
            r#"{"schema": "qdt-rmatrix/1", "num_qubits": 1, "bitstrings": ["0", "1"],
               "matrix": [[0.9, 0.1], [0.2, 0.9]]}"#,
        )
        .unwrap();
        assert!(matches!(
            read_response_matrix(&bad),
            Err(QdtError::CompletenessViolation { .. })
        ));
    }

    #[test]
    fn diagnostics_and_bootstrap_round_trip() {
        let dir = tmp();
        let p = ideal_computational_povm(1);
        let f = crate::mle::exact_frequencies(&p).unwrap();
        let result = crate::mle::run_mle_from_frequencies(&f, &Default::default()).unwrap();
        let path = dir.path().join("diag.json");
        write_diagnostics(&path, &result).unwrap();
        let diag = read_diagnostics(&path).unwrap();
        assert_eq!(diag.iterations, result.iterations);
        assert_eq!(diag.log_likelihood_trace, result.log_likelihood_trace);
        assert_eq!(
            diag.audit.as_ref().unwrap().min_eigenvalue,
            result.audit.as_ref().unwrap().min_eigenvalue
        );

        let report = BootstrapReport {
            std_devs: BTreeMap::from([
                ("0".to_string(), vec![1e-4, 2e-4, 3e-4, 4e-4]),
                ("1".to_string(), vec![1e-4, 2e-4, 3e-4, 4e-4]),
            ]),
            num_resamples: 100,
            num_failed: 2,
            audit: None,
        };
        let bpath = dir.path().join("boot.json");
        write_bootstrap(&bpath, &report).unwrap();
        let back = read_bootstrap(&bpath).unwrap();
        assert_eq!(back.std_devs, report.std_devs);
        assert_eq!(back.num_failed, 2);
    }

    #[test]
    fn emitted_files_always_carry_a_schema_tag() {
        let dir = tmp();
        let path = dir.path().join("dist.json");
        write_distribution(&path, 1, &[0.5, 0.5]).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(value["schema"], "qdt-dist/1");
        assert_abs_diff_eq!(value["probabilities"]["0"].as_f64().unwrap(), 0.5);
    }
}
