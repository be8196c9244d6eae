//! Iterative maximum-likelihood detector tomography.
//!
//! Given outcome frequencies f_{n,i} for known test states rho_i, the
//! detector POVM maximizing log L = sum_{n,i} f_{n,i} log Tr(Pi^(n) rho_i)
//! is found by repeated application of the update
//!
//! ```text
//! Pi^(n)  <-  R^(n) Pi^(n) R^(n)+        with
//! R^(n)   =   S^(-1/2) * sum_i (f_{n,i}/p_{n,i}) rho_i
//! S       =   sum_m sum_{j,k} (f_{m,j} f_{m,k})/(p_{m,j} p_{m,k}) rho_j Pi^(m) rho_k
//! ```
//!
//! where p_{n,i} = Tr(Pi^(n) rho_i) are the current predicted probabilities.
//! Writing A_m = sum_j (f_{m,j}/p_{m,j}) rho_j gives S = sum_m A_m Pi^(m) A_m
//! and R^(n) = S^(-1/2) A_n; in that form the updated elements sum to
//! S^(-1/2) S S^(-1/2) = 1 identically, so completeness survives the
//! iteration to machine precision and positivity is manifest from the
//! sandwich structure.  Iteration stops when the summed Frobenius norm of the
//! per-element change drops below a configurable threshold.
//!
//! Statistical uncertainty comes from a non-parametric bootstrap over
//! experiment runs: resample runs with replacement, redo the full
//! reconstruction per resample, and report per-coefficient standard
//! deviations.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::detector::{bits_to_index, index_to_bits, DetectorPovm};
use crate::error::{QdtError, Result};
use crate::rng::{substream, DOMAIN_BOOTSTRAP};
use crate::simulator::{born_probabilities, CountsDataset};
use crate::states::test_state_set_uncapped;
use crate::tensor::{
    frobenius_distance, inv_sqrt_psd, pauli_expand, pauli_reconstruct, ComplexMatrix,
};

/// Pooled relative frequencies f_{n,i}: probability of outcome n when state
/// i was prepared, estimated over all pooled shots.  Outcomes and states are
/// both in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    num_qubits: usize,
    num_states: usize,
    /// Row-major over [outcome][state].
    freqs: Vec<f64>,
}

impl FrequencyTable {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_outcomes(&self) -> usize {
        1usize << self.num_qubits
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn get(&self, outcome: usize, state: usize) -> f64 {
        self.freqs[outcome * self.num_states + state]
    }

    /// Builds the table from explicit per-state probability columns; each
    /// column must sum to 1.
    pub fn from_columns(num_qubits: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let num_outcomes = 1usize << num_qubits;
        let num_states = columns.len();
        let mut freqs = vec![0.0; num_outcomes * num_states];
        for (i, col) in columns.iter().enumerate() {
            if col.len() != num_outcomes {
                return Err(QdtError::BadDataset(format!(
                    "state {i} has {} outcome probabilities, expected {num_outcomes}",
                    col.len()
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(QdtError::BadDataset(format!(
                    "state {i} frequencies sum to {sum}"
                )));
            }
            for (n, v) in col.iter().enumerate() {
                freqs[n * num_states + i] = *v;
            }
        }
        Ok(Self {
            num_qubits,
            num_states,
            freqs,
        })
    }
}

/// Pools a dataset (optionally restricted to a multiset of run indices) into
/// a frequency table.
fn pool_runs(d: &CountsDataset, run_indices: &[usize]) -> Result<FrequencyTable> {
    let num_outcomes = 1usize << d.num_qubits;
    let num_states = d.runs[0].circuits.len();
    let total_shots = d.shots_per_circuit * run_indices.len() as u64;
    if total_shots == 0 {
        let state = d.runs[0].circuits.first().map(|c| c.state.clone());
        return Err(QdtError::ZeroShots {
            state: state.unwrap_or_default(),
        });
    }
    let mut counts = vec![0u64; num_outcomes * num_states];
    for &ri in run_indices {
        for (ci, record) in d.runs[ri].circuits.iter().enumerate() {
            for (bits, c) in &record.counts {
                counts[bits_to_index(bits)? * num_states + ci] += c;
            }
        }
    }
    let freqs = counts
        .into_iter()
        .map(|c| c as f64 / total_shots as f64)
        .collect();
    Ok(FrequencyTable {
        num_qubits: d.num_qubits,
        num_states,
        freqs,
    })
}

/// Pools every run of a dataset into outcome frequencies per state.
pub fn frequencies(d: &CountsDataset) -> Result<FrequencyTable> {
    d.validate()?;
    if d.runs.is_empty() {
        return Err(QdtError::ZeroShots {
            state: String::new(),
        });
    }
    let all: Vec<usize> = (0..d.runs.len()).collect();
    pool_runs(d, &all)
}

/// The infinite-shot frequency table of a detector: f_{n,i} equals the exact
/// Born probability.  Reconstruction from this table isolates estimator
/// behavior from sampling noise.
pub fn exact_frequencies(p: &DetectorPovm) -> Result<FrequencyTable> {
    let states = test_state_set_uncapped(p.num_qubits());
    let columns: Vec<Vec<f64>> = states
        .iter()
        .map(|s| born_probabilities(p, s.density()))
        .collect::<Result<_>>()?;
    FrequencyTable::from_columns(p.num_qubits(), &columns)
}

/// Configuration of the likelihood iteration.
#[derive(Clone, Debug)]
pub struct MleConfig {
    /// Terminate when the summed Frobenius step norm drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Floor applied to predicted probabilities wherever they enter a
    /// denominator or a logarithm.
    pub probability_floor: f64,
    /// Starting POVM; default is the maximally mixed element 1/2^N for every
    /// outcome.
    pub initial_povm: Option<DetectorPovm>,
    /// Record the log-likelihood every this many iterations.
    pub trace_stride: usize,
    /// Track per-iterate invariants (completeness, positivity, likelihood
    /// monotonicity); cheap at the dimensions this crate targets.
    pub audit: bool,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_iterations: 1_000_000,
            probability_floor: 1e-12,
            initial_povm: None,
            trace_stride: 100,
            audit: true,
        }
    }
}

/// Worst-case invariant drift observed across all iterates of a
/// reconstruction.
#[derive(Clone, Copy, Debug, Default)]
pub struct MleAudit {
    /// Largest completeness residual of any iterate.
    pub max_completeness_residual: f64,
    /// Smallest element eigenvalue of any iterate.
    pub min_eigenvalue: f64,
    /// Largest single-step decrease of the log-likelihood (0 when the
    /// iteration was monotone).
    pub max_likelihood_decrease: f64,
    /// Largest Hermiticity defect of S before symmetrization.
    pub max_s_asymmetry: f64,
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub povm: DetectorPovm,
    pub iterations: usize,
    pub final_step_norm: f64,
    /// Log-likelihood sampled every `trace_stride` iterations, ending with
    /// the final iterate.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
    pub audit: Option<MleAudit>,
}

/// Dense working form of the iteration state.
struct Engine {
    dim: usize,
    rhos: Vec<ComplexMatrix>,
    elements: Vec<ComplexMatrix>,
}

impl Engine {
    fn new(f: &FrequencyTable, initial: Option<&DetectorPovm>) -> Result<Self> {
        let n = f.num_qubits();
        let dim = 1usize << n;
        let states = test_state_set_uncapped(n);
        if states.len() != f.num_states() {
            return Err(QdtError::BadDataset(format!(
                "frequency table has {} states, canonical set has {}",
                f.num_states(),
                states.len()
            )));
        }
        let rhos: Vec<ComplexMatrix> = states.iter().map(|s| s.density().clone()).collect();
        let elements: Vec<ComplexMatrix> = match initial {
            Some(p) => {
                crate::detector::ensure_valid(p)?;
                p.iter().map(|(_, t)| pauli_reconstruct(t)).collect()
            }
            None => {
                let uniform = ComplexMatrix::identity(dim).scale(1.0 / dim as f64);
                vec![uniform; 1 << n]
            }
        };
        Ok(Self {
            dim,
            rhos,
            elements,
        })
    }

    /// Predicted probabilities p_{m,j} = Tr(Pi^(m) rho_j), unfloored.
    fn probabilities(&self) -> Vec<Vec<f64>> {
        self.elements
            .iter()
            .map(|pi| {
                self.rhos
                    .iter()
                    .map(|rho| {
                        let mut tr = 0.0;
                        for r in 0..self.dim {
                            for c in 0..self.dim {
                                tr += (pi.get(r, c) * rho.get(c, r)).re;
                            }
                        }
                        tr
                    })
                    .collect()
            })
            .collect()
    }

    fn log_likelihood(&self, f: &FrequencyTable, floor: f64) -> f64 {
        let probs = self.probabilities();
        let mut ll = 0.0;
        for (m, row) in probs.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                let fv = f.get(m, j);
                if fv > 0.0 {
                    ll += fv * p.max(floor).ln();
                }
            }
        }
        ll
    }

    /// One likelihood-iteration step; returns (step norm, S asymmetry).
    fn step(&mut self, f: &FrequencyTable, floor: f64) -> Result<(f64, f64)> {
        let probs = self.probabilities();
        // A_m = sum_j (f_{m,j}/p_{m,j}) rho_j, skipping zero-frequency terms.
        let mut a_ms = Vec::with_capacity(self.elements.len());
        for m in 0..self.elements.len() {
            let mut a = ComplexMatrix::zeros(self.dim);
            for (j, rho) in self.rhos.iter().enumerate() {
                let fv = f.get(m, j);
                if fv > 0.0 {
                    a.add_scaled(fv / probs[m][j].max(floor), rho)?;
                }
            }
            a_ms.push(a);
        }
        // S = sum_m A_m Pi^(m) A_m.
        let mut s = ComplexMatrix::zeros(self.dim);
        for (a, pi) in a_ms.iter().zip(&self.elements) {
            s = s.add(&a.matmul(pi)?.matmul(a)?)?;
        }
        let asymmetry = s.sub(&s.dagger())?.frobenius_norm();
        let s = s.symmetrize();
        let w = inv_sqrt_psd(&s, 1e-12)?;

        let mut step_norm = 0.0;
        for (pi, a) in self.elements.iter_mut().zip(&a_ms) {
            let b = w.matmul(a)?;
            let next = b.matmul(pi)?.matmul(&b.dagger())?.symmetrize();
            step_norm += frobenius_distance(&next, pi)?;
            *pi = next;
        }
        Ok((step_norm, asymmetry))
    }

    /// Completeness residual and minimum element eigenvalue of the current
    /// iterate, straight from the dense matrices.
    fn validity(&self) -> (f64, f64) {
        let mut sum = ComplexMatrix::zeros(self.dim);
        let mut min_eig = f64::INFINITY;
        for pi in &self.elements {
            sum = sum.add(pi).unwrap();
            let eig = crate::tensor::herm_eig(pi).expect("iterates stay Hermitian");
            min_eig = min_eig.min(eig.eigenvalues[0]);
        }
        let residual = frobenius_distance(&sum, &ComplexMatrix::identity(self.dim)).unwrap();
        (residual, min_eig)
    }

    fn to_povm(&self, num_qubits: usize) -> Result<DetectorPovm> {
        let mut elements = BTreeMap::new();
        for (i, pi) in self.elements.iter().enumerate() {
            elements.insert(
                index_to_bits(i, num_qubits),
                pauli_expand(pi, num_qubits)?,
            );
        }
        DetectorPovm::new(num_qubits, elements)
    }
}

/// Log-likelihood of a detector against a frequency table,
/// sum_{n,i} f_{n,i} log Tr(Pi^(n) rho_i), with probabilities floored before
/// the logarithm and zero-frequency terms contributing exactly zero.
pub fn log_likelihood(p: &DetectorPovm, f: &FrequencyTable, floor: f64) -> Result<f64> {
    let engine = Engine::new(f, Some(p))?;
    Ok(engine.log_likelihood(f, floor))
}

/// A single likelihood-iteration update of a POVM.  Exposed for testing the
/// fixed-point and invariant-preservation properties; [`run_mle`] drives the
/// same update in a loop.
pub fn mle_step(p: &DetectorPovm, f: &FrequencyTable, floor: f64) -> Result<DetectorPovm> {
    let mut engine = Engine::new(f, Some(p))?;
    engine.step(f, floor)?;
    engine.to_povm(p.num_qubits())
}

/// Reconstructs a detector from pooled counts.
pub fn run_mle(d: &CountsDataset, cfg: &MleConfig) -> Result<MleResult> {
    run_mle_from_frequencies(&frequencies(d)?, cfg)
}

/// Reconstructs a detector from an explicit frequency table.
pub fn run_mle_from_frequencies(f: &FrequencyTable, cfg: &MleConfig) -> Result<MleResult> {
    let mut engine = Engine::new(f, cfg.initial_povm.as_ref())?;
    let mut audit = MleAudit {
        min_eigenvalue: f64::INFINITY,
        ..MleAudit::default()
    };
    let mut trace = Vec::new();
    let mut last_ll = engine.log_likelihood(f, cfg.probability_floor);
    trace.push(last_ll);

    let mut converged = false;
    let mut iterations = 0;
    let mut final_step_norm = f64::INFINITY;
    while iterations < cfg.max_iterations {
        let (step_norm, asymmetry) = engine.step(f, cfg.probability_floor)?;
        iterations += 1;
        final_step_norm = step_norm;

        let ll = engine.log_likelihood(f, cfg.probability_floor);
        if cfg.audit {
            audit.max_s_asymmetry = audit.max_s_asymmetry.max(asymmetry);
            audit.max_likelihood_decrease = audit.max_likelihood_decrease.max(last_ll - ll);
            let (residual, min_eig) = engine.validity();
            audit.max_completeness_residual = audit.max_completeness_residual.max(residual);
            audit.min_eigenvalue = audit.min_eigenvalue.min(min_eig);
        }
        last_ll = ll;
        if iterations % cfg.trace_stride == 0 {
            trace.push(ll);
        }
        if step_norm < cfg.epsilon {
            converged = true;
            break;
        }
    }
    if iterations % cfg.trace_stride != 0 {
        trace.push(last_ll);
    }
    Ok(MleResult {
        povm: engine.to_povm(f.num_qubits())?,
        iterations,
        final_step_norm,
        log_likelihood_trace: trace,
        converged,
        audit: cfg.audit.then_some(audit),
    })
}

/// Bootstrap uncertainty of a reconstruction.
#[derive(Clone, Debug)]
pub struct BootstrapReport {
    /// Per-outcome, per-coefficient sample standard deviation (ddof = 1)
    /// over the converged resamples.
    pub std_devs: BTreeMap<String, Vec<f64>>,
    /// Resamples requested.
    pub num_resamples: usize,
    /// Resamples dropped for non-convergence.
    pub num_failed: usize,
    /// Worst-case iteration audit over all converged resamples.
    pub audit: Option<MleAudit>,
}

/// Non-parametric bootstrap: resample runs with replacement, reconstruct per
/// resample, report the spread of every POVM coefficient.
///
/// Resamples execute in parallel; each owns an RNG substream indexed by its
/// resample number, so the report is identical at any thread count.  A
/// resample whose reconstruction fails or stops unconverged is excluded;
/// more than 10% exclusions abort the whole bootstrap.
pub fn bootstrap(
    d: &CountsDataset,
    num_resamples: usize,
    seed: u64,
    cfg: &MleConfig,
) -> Result<BootstrapReport> {
    d.validate()?;
    let num_runs = d.runs.len();
    if num_runs < 2 {
        return Err(QdtError::TooFewRuns(num_runs));
    }
    let outcomes: Vec<String> = (0..1usize << d.num_qubits)
        .map(|i| index_to_bits(i, d.num_qubits))
        .collect();

    let results: Vec<Option<(Vec<Vec<f64>>, Option<MleAudit>)>> = (0..num_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, DOMAIN_BOOTSTRAP, r as u64, 0);
            let picks: Vec<usize> = (0..num_runs)
                .map(|_| rng.random_range(0..num_runs))
                .collect();
            let table = pool_runs(d, &picks).ok()?;
            let result = run_mle_from_frequencies(&table, cfg).ok()?;
            if !result.converged {
                return None;
            }
            let coeffs = outcomes
                .iter()
                .map(|bits| result.povm.element(bits).unwrap().coeffs().to_vec())
                .collect();
            Some((coeffs, result.audit))
        })
        .collect();

    let num_failed = results.iter().filter(|r| r.is_none()).count();
    if num_failed * 10 > num_resamples {
        return Err(QdtError::BootstrapTooManyFailures {
            failed: num_failed,
            total: num_resamples,
        });
    }
    let successes: Vec<&(Vec<Vec<f64>>, Option<MleAudit>)> =
        results.iter().flatten().collect();
    let k = successes.len();

    let mut audit: Option<MleAudit> = None;
    if cfg.audit {
        let mut merged = MleAudit {
            min_eigenvalue: f64::INFINITY,
            ..MleAudit::default()
        };
        for (_, a) in &successes {
            if let Some(a) = a {
                merged.max_completeness_residual =
                    merged.max_completeness_residual.max(a.max_completeness_residual);
                merged.min_eigenvalue = merged.min_eigenvalue.min(a.min_eigenvalue);
                merged.max_likelihood_decrease =
                    merged.max_likelihood_decrease.max(a.max_likelihood_decrease);
                merged.max_s_asymmetry = merged.max_s_asymmetry.max(a.max_s_asymmetry);
            }
        }
        audit = Some(merged);
    }

    let coeff_len = 4usize.pow(d.num_qubits as u32);
    let mut std_devs = BTreeMap::new();
    for (oi, bits) in outcomes.iter().enumerate() {
        let mut stds = Vec::with_capacity(coeff_len);
        for ci in 0..coeff_len {
            let values: Vec<f64> = successes.iter().map(|(c, _)| c[oi][ci]).collect();
            let mean = values.iter().sum::<f64>() / k as f64;
            let var = if k > 1 {
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1) as f64
            } else {
                0.0
            };
            stds.push(var.sqrt());
        }
        std_devs.insert(bits.clone(), stds);
    }
    Ok(BootstrapReport {
        std_devs,
        num_resamples,
        num_failed,
        audit,
    })
}
