//! Cross-experiment detector comparisons.
//!
//! Three workflows, all built on the single-qubit distance metric: comparing
//! each qubit's individually-characterized detector against its
//! parallel-characterization counterpart, comparing detectors conditioned on
//! a neighbor (reduced out of a two-qubit POVM) against stand-alone
//! references, and flagging entries that rise clearly above the statistical
//! fluctuation floor — the operational definition of crosstalk used
//! throughout.

use std::collections::BTreeMap;

use crate::detector::{detector_distance, reduce_detector, DetectorPovm};
use crate::error::{QdtError, Result};
use crate::mle::BootstrapReport;

/// A grid of detector distances with labeled axes.
///
/// `cols[c]` is `Some(j)` when column `c` means "conditioned on qubit j";
/// the single-column individual-vs-parallel table uses `None` since its
/// column is the parallel run, not a qubit.  Absent cells (the diagonal of a
/// conditioned table, or pairs that were never measured) hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<usize>,
    pub cols: Vec<Option<usize>>,
    /// `distances[r][c]`, same order as `rows`/`cols`.
    pub distances: Vec<Vec<Option<f64>>>,
    /// Typical statistical distance between repeated characterizations of
    /// the same detector; the unit in which crosstalk is judged.
    pub fluctuation_scale: f64,
}

impl ComparisonTable {
    /// Looks up the entry for row qubit `i`, column qubit `j`.
    pub fn entry(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.rows.iter().position(|&q| q == i)?;
        let c = self.cols.iter().position(|&q| q == Some(j))?;
        self.distances[r][c]
    }

    /// Off-diagonal cells that have no measured value, as (row, column)
    /// qubit pairs.
    pub fn missing_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, row) in self.distances.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if let Some(j) = self.cols[c] {
                    if j != self.rows[r] && cell.is_none() {
                        out.push((self.rows[r], j));
                    }
                }
            }
        }
        out
    }

    /// Aligned plain-text rendering, suitable for terminals and diffs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:>8}", "qubit"));
        for col in &self.cols {
            match col {
                Some(j) => out.push_str(&format!("{:>10}", format!("q{j}"))),
                None => out.push_str(&format!("{:>10}", "parallel")),
            }
        }
        out.push('\n');
        for (r, row) in self.distances.iter().enumerate() {
            out.push_str(&format!("{:>8}", format!("q{}", self.rows[r])));
            for cell in row {
                match cell {
                    Some(d) => out.push_str(&format!("{:>10.4}", d)),
                    None => out.push_str(&format!("{:>10}", "-")),
                }
            }
            out.push('\n');
        }
        out.push_str(&format!("floor {:.2e}\n", self.fluctuation_scale));
        out
    }
}

/// One judged table entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrosstalkFlag {
    /// (row qubit, column qubit); for a single-column table the pair
    /// degenerates to (q, q).
    pub qubit_pair: (usize, usize),
    pub distance: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Compares each qubit's conditioned detector (reduced out of a two-qubit
/// characterization) against its stand-alone reference.
///
/// Entry (i, j) is the distance between "detector of qubit i conditioned on
/// having characterized it jointly with qubit j" and the reference detector
/// of qubit i.  Pairs may be supplied under either key order; the POVM's
/// first tensor slot belongs to the first qubit of its key.  Missing pairs
/// leave their two cells empty and are listed by
/// [`ComparisonTable::missing_pairs`].
pub fn conditioned_table(
    two_qubit_povms: &BTreeMap<(usize, usize), DetectorPovm>,
    reference: &BTreeMap<usize, DetectorPovm>,
    fluctuation_scale: f64,
) -> Result<ComparisonTable> {
    for (&(a, b), p) in two_qubit_povms {
        if p.num_qubits() != 2 {
            return Err(QdtError::NotTwoQubit(p.num_qubits()));
        }
        if a == b {
            return Err(QdtError::BadQubitSubset(format!(
                "pair ({a}, {b}) names one qubit twice"
            )));
        }
    }
    for p in reference.values() {
        if p.num_qubits() != 1 {
            return Err(QdtError::NotSingleQubit(p.num_qubits()));
        }
    }
    let qubits: Vec<usize> = reference.keys().copied().collect();
    let mut distances = Vec::with_capacity(qubits.len());
    for &i in &qubits {
        let mut row = Vec::with_capacity(qubits.len());
        for &j in &qubits {
            if i == j {
                row.push(None);
                continue;
            }
            // The pair may have been characterized under either ordering;
            // reduce out whichever slot qubit i occupies.
            let reduced = if let Some(p) = two_qubit_povms.get(&(i, j)) {
                Some(reduce_detector(p, &[0])?)
            } else if let Some(p) = two_qubit_povms.get(&(j, i)) {
                Some(reduce_detector(p, &[1])?)
            } else {
                None
            };
            match reduced {
                Some(cond) => row.push(Some(detector_distance(&cond, &reference[&i])?)),
                None => row.push(None),
            }
        }
        distances.push(row);
    }
    Ok(ComparisonTable {
        rows: qubits.clone(),
        cols: qubits.into_iter().map(Some).collect(),
        distances,
        fluctuation_scale,
    })
}

/// Per-qubit distance between individually- and parallel-characterized
/// detectors, as a one-column table.
pub fn individual_vs_parallel(
    ind: &BTreeMap<usize, DetectorPovm>,
    par: &BTreeMap<usize, DetectorPovm>,
    fluctuation_scale: f64,
) -> Result<ComparisonTable> {
    if ind.keys().ne(par.keys()) {
        return Err(QdtError::KeyMismatch(format!(
            "individual qubits {:?} vs parallel qubits {:?}",
            ind.keys().collect::<Vec<_>>(),
            par.keys().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    let mut distances = Vec::new();
    for (&q, p_ind) in ind {
        rows.push(q);
        distances.push(vec![Some(detector_distance(p_ind, &par[&q])?)]);
    }
    Ok(ComparisonTable {
        rows,
        cols: vec![None],
        distances,
        fluctuation_scale,
    })
}

/// Judges every present table entry against `threshold_multiplier` times the
/// fluctuation floor.  Returns one flag per entry, row-major order.
pub fn flag_crosstalk(t: &ComparisonTable, threshold_multiplier: f64) -> Vec<CrosstalkFlag> {
    assert!(
        t.fluctuation_scale > 0.0,
        "fluctuation scale must be positive to judge crosstalk"
    );
    let threshold = threshold_multiplier * t.fluctuation_scale;
    let mut flags = Vec::new();
    for (r, row) in t.distances.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if let Some(distance) = *cell {
                let col_qubit = t.cols[c].unwrap_or(t.rows[r]);
                flags.push(CrosstalkFlag {
                    qubit_pair: (t.rows[r], col_qubit),
                    distance,
                    threshold,
                    flagged: distance > threshold,
                });
            }
        }
    }
    flags
}

/// Default multiplier: an entry "one order of magnitude" above the floor
/// counts as crosstalk.
pub const DEFAULT_THRESHOLD_MULTIPLIER: f64 = 10.0;

/// Distills a fluctuation floor from single-qubit bootstrap reports: per
/// qubit, the standard deviations of the ground element's four coefficients
/// combine through the same Euclidean formula as the distance metric; the
/// median across qubits becomes the floor.
pub fn fluctuation_floor_from_bootstrap(reports: &[BootstrapReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(QdtError::BadDataset(
            "no bootstrap reports to derive a fluctuation floor from".into(),
        ));
    }
    let mut norms = Vec::with_capacity(reports.len());
    for report in reports {
        let stds = report
            .std_devs
            .get("0")
            .ok_or_else(|| QdtError::MissingOutcome("0".into()))?;
        if stds.len() != 4 {
            return Err(QdtError::NotSingleQubit(stds.len() / 4));
        }
        norms.push(stds.iter().map(|s| s * s).sum::<f64>().sqrt());
    }
    norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = norms.len();
    Ok(if n % 2 == 1 {
        norms[n / 2]
    } else {
        0.5 * (norms[n / 2 - 1] + norms[n / 2])
    })
}
