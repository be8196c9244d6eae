//! Black-box tests of the `qdt` binary: each spawns the real executable and
//! checks files, stdout, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qdt_core::detector::{detector_distance, ideal_computational_povm, AVector, DetectorPovm};
use qdt_core::io;

fn qdt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

#[test]
fn simulate_emits_the_documented_record_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = qdt(
        dir.path(),
        &[
            "simulate", "--qubits", "1", "--shots", "64", "--runs", "100", "--seed", "7",
            "--ideal", "--out", "one.json",
        ],
    );
    assert_ok(&out);
    let dataset = io::read_counts(&dir.path().join("one.json")).unwrap();
    let records: usize = dataset.runs.iter().map(|r| r.circuits.len()).sum();
    assert_eq!(records, 600); // 6 states x 100 runs

    let out = qdt(
        dir.path(),
        &[
            "simulate", "--qubits", "2", "--shots", "64", "--runs", "1", "--seed", "7",
            "--ideal", "--out", "two.json",
        ],
    );
    assert_ok(&out);
    let dataset = io::read_counts(&dir.path().join("two.json")).unwrap();
    assert_eq!(dataset.runs[0].circuits.len(), 36); // 6^2
}

#[test]
fn identical_flags_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        assert_ok(&qdt(
            dir.path(),
            &[
                "simulate", "--qubits", "1", "--shots", "256", "--runs", "5", "--seed", "42",
                "--p01", "0.05", "--p10", "0.02", "--out", name,
            ],
        ));
    }
    assert_eq!(
        std::fs::read(dir.path().join("a.json")).unwrap(),
        std::fs::read(dir.path().join("b.json")).unwrap()
    );
}

#[test]
fn tomo_recovers_the_ideal_detector_from_its_counts() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&qdt(
        dir.path(),
        &[
            "simulate", "--qubits", "1", "--shots", "1024", "--runs", "20", "--seed", "3",
            "--ideal", "--out", "counts.json",
        ],
    ));
    assert_ok(&qdt(
        dir.path(),
        &[
            "tomo", "--counts", "counts.json", "--out-povm", "povm.json", "--out-diag",
            "diag.json",
        ],
    ));
    let povm = io::read_povm(&dir.path().join("povm.json")).unwrap();
    let d = detector_distance(&povm, &ideal_computational_povm(1)).unwrap();
    assert!(d < 5e-3, "distance {d}");
    let diag = io::read_diagnostics(&dir.path().join("diag.json")).unwrap();
    assert!(diag.converged);
    assert!(diag.audit.is_some());
}

#[test]
fn tomo_recovers_a_noisy_detector_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&qdt(
        dir.path(),
        &[
            "simulate", "--qubits", "1", "--shots", "8192", "--runs", "50", "--seed", "12",
            "--p01", "0.08", "--p10", "0.04", "--tilt-x", "0.02", "--out", "counts.json",
        ],
    ));
    assert_ok(&qdt(
        dir.path(),
        &["tomo", "--counts", "counts.json", "--out-povm", "povm.json"],
    ));
    let povm = io::read_povm(&dir.path().join("povm.json")).unwrap();
    let truth = qdt_core::simulator::make_noisy_detector(&qdt_core::simulator::NoisySpec::uniform(
        1,
        qdt_core::simulator::QubitNoise {
            p01: 0.08,
            p10: 0.04,
            tilt_x: 0.02,
            tilt_y: 0.0,
        },
    ))
    .unwrap();
    let got = povm.element("0").unwrap().coeffs();
    let want = truth.element("0").unwrap().coeffs();
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 5e-3, "coefficient drift {g} vs {w}");
    }
}

#[test]
fn malformed_input_exits_2_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("junk.json"), "{\"schema\": \"qdt-counts/1\",").unwrap();
    let out = qdt(
        dir.path(),
        &["tomo", "--counts", "junk.json", "--out-povm", "p.json"],
    );
    assert_eq!(exit_code(&out), 2);
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!dir.path().join("p.json").exists());
}

#[test]
fn compare_reports_zero_for_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    io::write_povm(&path, &ideal_computational_povm(1)).unwrap();
    let out = qdt(
        dir.path(),
        &["compare", "--a", "p.json", "--b", "p.json", "--out", "t.json"],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("distance 0.000000"));
    let table = io::read_table(&dir.path().join("t.json")).unwrap();
    assert_eq!(table.distances[0][0], Some(0.0));
}

#[test]
fn reduce_recovers_a_product_factor_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let qa = DetectorPovm::from_avector(AVector::new(0.54, 0.01, 0.0, 0.41));
    let qb = DetectorPovm::from_avector(AVector::new(0.49, 0.0, -0.02, 0.455));
    let pair = DetectorPovm::product(&[qa.clone(), qb.clone()]).unwrap();
    io::write_povm(&dir.path().join("pair.json"), &pair).unwrap();
    assert_ok(&qdt(
        dir.path(),
        &["reduce", "--povm", "pair.json", "--keep", "1", "--out", "q1.json"],
    ));
    let back = io::read_povm(&dir.path().join("q1.json")).unwrap();
    for (bits, t) in qb.iter() {
        let rt = back.element(bits).unwrap();
        for (x, y) in t.coeffs().iter().zip(rt.coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn mitigate_round_trips_a_known_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let a = AVector::new(0.51, 0.0, 0.0, 0.44);
    let m = qdt_core::mitigation::build_response_matrix(&[(a, a.complement())]).unwrap();
    let observed = m.apply(&[0.7, 0.3]);
    io::write_povm(
        &dir.path().join("povm.json"),
        &DetectorPovm::from_avector(a),
    )
    .unwrap();
    io::write_distribution(&dir.path().join("obs.json"), 1, &observed).unwrap();
    for method in ["lsq", "inversion"] {
        let out_name = format!("corrected-{method}.json");
        assert_ok(&qdt(
            dir.path(),
            &[
                "mitigate", "--matrix-from", "povm.json", "--dist", "obs.json", "--method",
                method, "--out", &out_name, "--out-matrix", "m.json",
            ],
        ));
        let (_, corrected) = io::read_distribution(&dir.path().join(&out_name)).unwrap();
        assert!((corrected[0] - 0.7).abs() < 1e-8, "{method}: {corrected:?}");
    }
    // The stored matrix file can feed a second mitigation directly.
    assert_ok(&qdt(
        dir.path(),
        &[
            "mitigate", "--matrix-from", "m.json", "--dist", "obs.json", "--out",
            "again.json",
        ],
    ));
    let (_, corrected) = io::read_distribution(&dir.path().join("again.json")).unwrap();
    assert!((corrected[0] - 0.7).abs() < 1e-8);
}

#[test]
fn mitigate_rejects_mismatched_sizes() {
    let dir = tempfile::tempdir().unwrap();
    io::write_povm(
        &dir.path().join("povm.json"),
        &ideal_computational_povm(2),
    )
    .unwrap();
    io::write_distribution(&dir.path().join("obs.json"), 1, &[0.5, 0.5]).unwrap();
    let out = qdt(
        dir.path(),
        &[
            "mitigate", "--matrix-from", "povm.json", "--dist", "obs.json", "--out",
            "c.json",
        ],
    );
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn bootstrap_writes_a_spread_report() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&qdt(
        dir.path(),
        &[
            "simulate", "--qubits", "1", "--shots", "512", "--runs", "8", "--seed", "5",
            "--p01", "0.06", "--p10", "0.03", "--out", "counts.json",
        ],
    ));
    assert_ok(&qdt(
        dir.path(),
        &[
            "bootstrap", "--counts", "counts.json", "--resamples", "25", "--seed", "9",
            "--out", "boot.json",
        ],
    ));
    let report = io::read_bootstrap(&dir.path().join("boot.json")).unwrap();
    assert_eq!(report.num_resamples, 25);
    assert!(report.std_devs["0"].iter().any(|&s| s > 0.0));
}

#[test]
fn json_report_round_trips_the_povm_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let povm = DetectorPovm::from_avector(AVector::new(1.0 / 3.0, 0.017, -0.003, 0.29));
    let original = dir.path().join("in.json");
    io::write_povm(&original, &povm).unwrap();
    assert_ok(&qdt(
        dir.path(),
        &["report", "--povm", "in.json", "--format", "json", "--out", "copy.json"],
    ));
    assert_eq!(
        std::fs::read(&original).unwrap(),
        std::fs::read(dir.path().join("copy.json")).unwrap()
    );
}

#[test]
fn text_report_shows_ideal_arrows_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    io::write_povm(&dir.path().join("p.json"), &ideal_computational_povm(1)).unwrap();
    let out = qdt(dir.path(), &["report", "--povm", "p.json"]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("width 0.5000"), "{text}");
    assert!(text.contains("(+0.0000, +0.0000, +1.0000)"), "{text}");
    assert!(text.contains("(-0.0000, -0.0000, -1.0000)") || text.contains("(+0.0000, +0.0000, -1.0000)"), "{text}");
    assert!(text.contains("valid"), "{text}");
}

#[test]
fn svg_report_is_well_formed_with_machine_readable_arrows() {
    let dir = tempfile::tempdir().unwrap();
    io::write_povm(&dir.path().join("p.json"), &ideal_computational_povm(1)).unwrap();
    assert_ok(&qdt(
        dir.path(),
        &["report", "--povm", "p.json", "--format", "svg", "--out", "fig.svg"],
    ));
    let svg = std::fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("data-az=\"1.000000\""));
    assert!(svg.contains("data-az=\"-1.000000\""));
    assert!(svg.contains("stroke-width=\"4.000\"")); // 8 * ideal weight 0.5
    assert_eq!(svg.matches("<line").count(), 3); // 2 arrows + 1 axis

    // Fully depolarized detector: both arrows have zero length, and the
    // figure must still be well-formed.
    let mut elements = std::collections::BTreeMap::new();
    for bits in ["0", "1"] {
        elements.insert(
            bits.to_string(),
            qdt_core::tensor::PauliCoeffTensor::new(1, vec![0.5, 0.0, 0.0, 0.0]).unwrap(),
        );
    }
    let degenerate = DetectorPovm::new(1, elements).unwrap();
    io::write_povm(&dir.path().join("d.json"), &degenerate).unwrap();
    assert_ok(&qdt(
        dir.path(),
        &["report", "--povm", "d.json", "--format", "svg", "--out", "deg.svg"],
    ));
    let svg = std::fs::read_to_string(dir.path().join("deg.svg")).unwrap();
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("data-length=\"0.000000\""));
}

#[test]
fn overlength_arrow_is_clamped_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    // a3 > a0: positivity violated, arrow longer than 1.
    let mut elements = std::collections::BTreeMap::new();
    elements.insert(
        "0".to_string(),
        qdt_core::tensor::PauliCoeffTensor::new(1, vec![0.5, 0.0, 0.0, 0.6]).unwrap(),
    );
    elements.insert(
        "1".to_string(),
        qdt_core::tensor::PauliCoeffTensor::new(1, vec![0.5, 0.0, 0.0, -0.6]).unwrap(),
    );
    let povm = DetectorPovm::new(1, elements).unwrap();
    io::write_povm(&dir.path().join("p.json"), &povm).unwrap();
    let out = qdt(
        dir.path(),
        &["report", "--povm", "p.json", "--format", "svg", "--out", "fig.svg"],
    );
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds 1"));
    let svg = std::fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.contains("data-clamped=\"true\""));
    assert!(svg.contains("data-az=\"1.000000\"")); // clamped direction
    assert!(svg.contains("data-length=\"1.200000\"")); // raw length preserved
}

#[test]
fn qdt_threads_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qdt"))
        .current_dir(dir.path())
        .env("QDT_THREADS", "0")
        .args(["report", "--povm", "missing.json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("QDT_THREADS"));
}

#[test]
fn reduce_rejects_bad_keep_lists() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    io::write_povm(&path, &ideal_computational_povm(2)).unwrap();
    for keep in ["x", "1,0", "0,1"] {
        let out = qdt(
            dir.path(),
            &["reduce", "--povm", "p.json", "--keep", keep, "--out", "r.json"],
        );
        assert_eq!(exit_code(&out), 2, "--keep {keep} should be rejected");
    }
    let _ = path;
}
