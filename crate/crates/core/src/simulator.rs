//! Synthetic measurement data from a known detector.
//!
//! The simulator is the oracle of this crate: it draws multinomial shot
//! counts from the exact Born probabilities of a "true" POVM, so that
//! reconstruction and mitigation can be tested against ground truth.  All
//! sampling runs on per-(run, circuit) RNG substreams (see [`crate::rng`]),
//! making datasets reproducible byte-for-byte from a single seed.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::detector::{
    check_povm, ensure_valid, index_to_bits, AVector, DetectorPovm, DEFAULT_VALIDITY_TOL,
};
use crate::error::{QdtError, Result};
use crate::rng::{substream, DOMAIN_EXPERIMENT, DOMAIN_STATE_MEASUREMENT};
use crate::states::{test_state_set, TestState};
use crate::tensor::{herm_eig, inv_sqrt_psd, pauli_expand, Complex64, ComplexMatrix};

/// Counts for one prepared state: outcome bitstring -> shots observed.
/// Outcomes with zero counts are omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CircuitRecord {
    pub state: String,
    pub counts: BTreeMap<String, u64>,
}

/// One full pass over the test-state set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub circuits: Vec<CircuitRecord>,
}

/// A complete tomography dataset: `runs` repetitions of the 6^N-circuit
/// experiment at fixed shots per circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct CountsDataset {
    pub num_qubits: usize,
    pub shots_per_circuit: u64,
    pub runs: Vec<Run>,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

impl CountsDataset {
    /// Structural validation: every run carries the full canonical circuit
    /// list and every record's counts sum to the declared shots.
    pub fn validate(&self) -> Result<()> {
        let states = crate::states::test_state_set_uncapped(self.num_qubits);
        let expected: Vec<String> = states.iter().map(|s| s.label()).collect();
        for (ri, run) in self.runs.iter().enumerate() {
            if run.circuits.len() != expected.len() {
                return Err(QdtError::BadDataset(format!(
                    "run {ri} has {} circuits, expected {}",
                    run.circuits.len(),
                    expected.len()
                )));
            }
            for (ci, record) in run.circuits.iter().enumerate() {
                if record.state != expected[ci] {
                    return Err(QdtError::BadDataset(format!(
                        "run {ri} circuit {ci} is state {:?}, expected {:?}",
                        record.state, expected[ci]
                    )));
                }
                let mut total = 0u64;
                for (bits, count) in &record.counts {
                    if bits.len() != self.num_qubits
                        || crate::detector::bits_to_index(bits).is_err()
                    {
                        return Err(QdtError::BadBitstring(bits.clone()));
                    }
                    total += count;
                }
                if total != self.shots_per_circuit {
                    return Err(QdtError::BadDataset(format!(
                        "run {ri} circuit {ci} counts sum to {total}, expected {}",
                        self.shots_per_circuit
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Readout noise for one qubit: classical flip probabilities plus small
/// coherent tilts injected as sigma_x / sigma_y coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitNoise {
    /// Probability of reading 1 when 0 was prepared.
    pub p01: f64,
    /// Probability of reading 0 when 1 was prepared.
    pub p10: f64,
    pub tilt_x: f64,
    pub tilt_y: f64,
}

impl QubitNoise {
    pub fn classical(p01: f64, p10: f64) -> Self {
        Self {
            p01,
            p10,
            tilt_x: 0.0,
            tilt_y: 0.0,
        }
    }

    pub fn ideal() -> Self {
        Self::classical(0.0, 0.0)
    }
}

/// Per-qubit noise model for a product detector.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisySpec {
    pub qubits: Vec<QubitNoise>,
}

impl NoisySpec {
    pub fn uniform(num_qubits: usize, noise: QubitNoise) -> Self {
        Self {
            qubits: vec![noise; num_qubits],
        }
    }
}

/// Builds the product POVM described by a [`NoisySpec`].
///
/// The diagonal conditions `<0|Pi^(0)|0> = 1 - p01` and `<1|Pi^(0)|1> = p10`
/// fix `a0 = (1 - p01 + p10)/2` and `a3 = (1 - p01 - p10)/2`; the tilts enter
/// directly as a1, a2.  Tilts large enough to push either element's smallest
/// eigenvalue negative are rejected, naming the largest admissible tilt
/// magnitude for that qubit.
pub fn make_noisy_detector(spec: &NoisySpec) -> Result<DetectorPovm> {
    assert!(!spec.qubits.is_empty(), "spec needs at least one qubit");
    let mut factors = Vec::with_capacity(spec.qubits.len());
    for (q, noise) in spec.qubits.iter().enumerate() {
        for p in [noise.p01, noise.p10] {
            if !(0.0..=1.0).contains(&p) {
                return Err(QdtError::BadReadoutProbability { qubit: q, value: p });
            }
        }
        let a0 = (1.0 - noise.p01 + noise.p10) / 2.0;
        let a3 = (1.0 - noise.p01 - noise.p10) / 2.0;
        let tilt = (noise.tilt_x * noise.tilt_x + noise.tilt_y * noise.tilt_y).sqrt();
        // Positivity of both elements: tilt^2 + a3^2 <= min(a0, 1-a0)^2.
        let budget = a0.min(1.0 - a0).powi(2) - a3 * a3;
        let max_tilt = budget.max(0.0).sqrt();
        if tilt > max_tilt + 1e-12 {
            return Err(QdtError::TiltTooLarge {
                qubit: q,
                tilt,
                max_tilt,
            });
        }
        factors.push(DetectorPovm::from_avector(AVector::new(
            a0,
            noise.tilt_x,
            noise.tilt_y,
            a3,
        )));
    }
    let povm = DetectorPovm::product(&factors)?;
    ensure_valid(&povm)?;
    Ok(povm)
}

/// Deviation of a probability sum from 1 accepted silently and renormalized
/// away.  Matches the completeness tolerance of [`check_povm`]: a POVM that
/// passes validation can shift Born sums by at most its completeness
/// residual.
const PROB_SUM_TOL: f64 = 1e-8;

/// Born probabilities `Tr(rho Pi^(n))` for every outcome, canonical order.
///
/// Tiny negatives (round-off) are clipped to zero and the vector is
/// renormalized when its sum is within [`PROB_SUM_TOL`] of 1; anything worse
/// is an invalid POVM/state pairing and errors out.
pub fn born_probabilities(p: &DetectorPovm, rho: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = p.num_qubits();
    let rho_t = pauli_expand(rho, n)?;
    let dim = (1usize << n) as f64;
    let mut probs = Vec::with_capacity(1 << n);
    for (bits, tensor) in p.iter() {
        // Tr(rho Pi) = 2^N * <c_rho, c_Pi> by Pauli orthogonality.
        let mut v = 0.0f64;
        for (a, b) in rho_t.coeffs().iter().zip(tensor.coeffs()) {
            v += a * b;
        }
        v *= dim;
        if v < -1e-10 {
            return Err(QdtError::NegativeProbability {
                value: v,
                outcome: bits.clone(),
            });
        }
        probs.push(v.clamp(0.0, 1.0));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        return Err(QdtError::ProbabilitySumOff { sum });
    }
    for v in &mut probs {
        *v /= sum;
    }
    Ok(probs)
}

fn check_density(rho: &ComplexMatrix) -> Result<()> {
    if (rho.trace().re - 1.0).abs() > 1e-10 || rho.trace().im.abs() > 1e-10 {
        return Err(QdtError::BadDensityMatrix(format!(
            "trace {} is not 1",
            rho.trace().re
        )));
    }
    let eig = herm_eig(rho).map_err(|_| {
        QdtError::BadDensityMatrix("state matrix is not Hermitian".to_string())
    })?;
    if eig.eigenvalues[0] < -1e-8 {
        return Err(QdtError::BadDensityMatrix(format!(
            "negative eigenvalue {:.3e}",
            eig.eigenvalues[0]
        )));
    }
    Ok(())
}

/// Multinomial draw: `shots` inverse-CDF samples over the probability
/// vector, returned as per-outcome counts in canonical order.
fn multinomial(probs: &[f64], shots: u64, rng: &mut ChaCha12Rng) -> Vec<u64> {
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0f64;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u: f64 = rng.random();
        // Find the first cumulative bin above u; the last bin catches
        // u ~ 1 - epsilon even if acc fell microscopically short of 1.
        let idx = cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(probs.len() - 1);
        counts[idx] += 1;
    }
    counts
}

/// Samples shot counts for one prepared test state.
pub fn sample_counts(
    p: &DetectorPovm,
    state: &TestState,
    shots: u64,
    rng: &mut ChaCha12Rng,
) -> Result<BTreeMap<String, u64>> {
    let probs = born_probabilities(p, state.density())?;
    let counts = multinomial(&probs, shots, rng);
    let n = p.num_qubits();
    Ok(counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(i, c)| (index_to_bits(i, n), c))
        .collect())
}

/// Runs the full tomography experiment: `runs` repetitions of the canonical
/// 6^N-circuit sweep, each circuit on its own RNG substream.
pub fn simulate_qdt_experiment(
    p: &DetectorPovm,
    shots: u64,
    runs: usize,
    seed: u64,
) -> Result<CountsDataset> {
    ensure_valid(p)?;
    let states = test_state_set(p.num_qubits())?;
    let mut run_list = Vec::with_capacity(runs);
    for run_idx in 0..runs {
        let mut circuits = Vec::with_capacity(states.len());
        for (circuit_idx, state) in states.iter().enumerate() {
            let mut rng = substream(
                seed,
                DOMAIN_EXPERIMENT,
                run_idx as u64,
                circuit_idx as u64,
            );
            circuits.push(CircuitRecord {
                state: state.label(),
                counts: sample_counts(p, state, shots, &mut rng)?,
            });
        }
        run_list.push(Run { circuits });
    }
    Ok(CountsDataset {
        num_qubits: p.num_qubits(),
        shots_per_circuit: shots,
        runs: run_list,
        seed,
        metadata: BTreeMap::new(),
    })
}

/// Measures a fixed state repeatedly and returns the pooled outcome
/// frequencies over all runs, in canonical outcome order.
///
/// `shots = 0` is the infinite-shot sentinel: the exact Born probabilities
/// are returned and no randomness is consumed.
pub fn simulate_state_measurement(
    p: &DetectorPovm,
    rho: &ComplexMatrix,
    shots: u64,
    runs: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    ensure_valid(p)?;
    check_density(rho)?;
    let probs = born_probabilities(p, rho)?;
    if shots == 0 {
        return Ok(probs);
    }
    let mut totals = vec![0u64; probs.len()];
    for run_idx in 0..runs {
        let mut rng = substream(seed, DOMAIN_STATE_MEASUREMENT, run_idx as u64, 0);
        for (slot, c) in totals.iter_mut().zip(multinomial(&probs, shots, &mut rng)) {
            *slot += c;
        }
    }
    let grand_total = (shots * runs as u64) as f64;
    Ok(totals.iter().map(|&c| c as f64 / grand_total).collect())
}

/// Substream domain for [`random_povm`] draws.
const DOMAIN_RANDOM_POVM: u64 = 4;

/// A random full-rank valid POVM: Wishart-style positive blocks
/// `G_n = A_n A_n^dag` whitened by the inverse square root of their sum, so
/// completeness and positivity hold to machine precision.
pub fn random_povm(num_qubits: usize, seed: u64) -> DetectorPovm {
    let dim = 1usize << num_qubits;
    let outcomes = 1usize << num_qubits;
    let mut rng = substream(seed, DOMAIN_RANDOM_POVM, 0, 0);
    let mut blocks = Vec::with_capacity(outcomes);
    let mut total = ComplexMatrix::zeros(dim);
    for _ in 0..outcomes {
        let mut a = ComplexMatrix::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                let re: f64 = rng.random::<f64>() - 0.5;
                let im: f64 = rng.random::<f64>() - 0.5;
                a.set(r, c, Complex64::new(re, im));
            }
        }
        let g = a.matmul(&a.dagger()).unwrap();
        total = total.add(&g).unwrap();
        blocks.push(g);
    }
    let w = inv_sqrt_psd(&total, 1e-12).expect("sum of random Wishart blocks is PD");
    let mut elements = BTreeMap::new();
    for (i, g) in blocks.into_iter().enumerate() {
        let pi = w.matmul(&g).unwrap().matmul(&w).unwrap().symmetrize();
        elements.insert(
            index_to_bits(i, num_qubits),
            pauli_expand(&pi, num_qubits).unwrap(),
        );
    }
    let povm = DetectorPovm::new(num_qubits, elements).unwrap();
    debug_assert!(check_povm(&povm, DEFAULT_VALIDITY_TOL).is_valid);
    povm
}
