//! POVM model of an N-qubit detector.
//!
//! A detector is a map from outcome bitstrings to Hermitian operators, stored
//! here in the Pauli coefficient representation ([`PauliCoeffTensor`]).  The
//! module provides the ideal computational-basis detector, validity checking
//! (completeness + positivity), partial-trace reduction to conditioned
//! single-qubit detectors, the a-vector distance used to compare detectors,
//! and the singular-value test for separability of two-qubit elements.

use std::collections::BTreeMap;

use crate::error::{QdtError, Result};
use crate::tensor::{
    herm_eig, pauli_reconstruct, singular_values, PauliCoeffTensor,
};

/// Default tolerance for completeness residual and (negated) for the minimum
/// eigenvalue: one order looser than linear-algebra round-off, well below the
/// O(1e-4) statistical effects seen in reconstructions.
pub const DEFAULT_VALIDITY_TOL: f64 = 1e-8;

/// All outcome bitstrings of the given length, in ascending binary order
/// ("00", "01", "10", "11", ...).  Leftmost character is qubit 0.
pub fn bitstrings(num_qubits: usize) -> Vec<String> {
    (0..1usize << num_qubits)
        .map(|i| index_to_bits(i, num_qubits))
        .collect()
}

pub fn index_to_bits(index: usize, num_qubits: usize) -> String {
    (0..num_qubits)
        .map(|q| {
            if (index >> (num_qubits - 1 - q)) & 1 == 1 {
                '1'
            } else {
                '0'
            }
        })
        .collect()
}

pub fn bits_to_index(bits: &str) -> Result<usize> {
    let mut index = 0usize;
    for ch in bits.chars() {
        index <<= 1;
        match ch {
            '0' => {}
            '1' => index |= 1,
            _ => return Err(QdtError::BadBitstring(bits.to_string())),
        }
    }
    Ok(index)
}

/// The four Pauli coefficients (a0, a1, a2, a3) of a single-qubit POVM
/// element `Pi = sum_i a_i sigma_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AVector {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl AVector {
    pub fn new(a0: f64, a1: f64, a2: f64, a3: f64) -> Self {
        Self { a0, a1, a2, a3 }
    }

    /// Length of the spatial part (a1, a2, a3).
    pub fn bloch_norm(&self) -> f64 {
        (self.a1 * self.a1 + self.a2 * self.a2 + self.a3 * self.a3).sqrt()
    }

    /// The element's two eigenvalues, `a0 -+ |a_vec|`, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let r = self.bloch_norm();
        (self.a0 - r, self.a0 + r)
    }

    /// The partner element demanded by completeness:
    /// `a_vec^(1) = (1,0,0,0) - a_vec^(0)`.
    pub fn complement(&self) -> Self {
        Self {
            a0: 1.0 - self.a0,
            a1: -self.a1,
            a2: -self.a2,
            a3: -self.a3,
        }
    }

    pub fn to_tensor(&self) -> PauliCoeffTensor {
        PauliCoeffTensor::new(1, vec![self.a0, self.a1, self.a2, self.a3]).unwrap()
    }

    pub fn from_tensor(t: &PauliCoeffTensor) -> Result<Self> {
        if t.num_qubits() != 1 {
            return Err(QdtError::NotSingleQubit(t.num_qubits()));
        }
        Ok(Self::new(t.get(0), t.get(1), t.get(2), t.get(3)))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let d0 = self.a0 - other.a0;
        let d1 = self.a1 - other.a1;
        let d2 = self.a2 - other.a2;
        let d3 = self.a3 - other.a3;
        (d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3).sqrt()
    }
}

/// N-qubit detector POVM: one Pauli coefficient tensor per outcome
/// bitstring.
///
/// Construction validates shape only (2^N elements, consistent sizes);
/// numeric validity — completeness and positivity — is a separate, tolerance-
/// dependent question answered by [`check_povm`], because intermediate
/// objects inside iterative reconstruction are allowed to drift slightly
/// before being checked.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorPovm {
    num_qubits: usize,
    elements: BTreeMap<String, PauliCoeffTensor>,
}

impl DetectorPovm {
    pub fn new(num_qubits: usize, elements: BTreeMap<String, PauliCoeffTensor>) -> Result<Self> {
        assert!(num_qubits >= 1, "a detector needs at least one qubit");
        let expected = 1usize << num_qubits;
        if elements.len() != expected {
            return Err(QdtError::WrongElementCount {
                expected,
                found: elements.len(),
            });
        }
        for (bits, tensor) in &elements {
            if bits.len() != num_qubits || bits_to_index(bits).is_err() {
                return Err(QdtError::BadBitstring(bits.clone()));
            }
            if tensor.num_qubits() != num_qubits {
                return Err(QdtError::CoeffLengthMismatch {
                    num_qubits,
                    expected: 4usize.pow(num_qubits as u32),
                    found: tensor.coeffs().len(),
                });
            }
        }
        Ok(Self {
            num_qubits,
            elements,
        })
    }

    /// Single-qubit detector from the a-vector of its "0" element; the "1"
    /// element is fixed by completeness.
    pub fn from_avector(a: AVector) -> Self {
        let mut elements = BTreeMap::new();
        elements.insert("0".to_string(), a.to_tensor());
        elements.insert("1".to_string(), a.complement().to_tensor());
        Self {
            num_qubits: 1,
            elements,
        }
    }

    /// Tensor product of per-qubit detectors, qubit 0 taken from the first
    /// factor.
    pub fn product(factors: &[DetectorPovm]) -> Result<Self> {
        assert!(!factors.is_empty(), "need at least one factor");
        let mut acc = factors[0].clone();
        for f in &factors[1..] {
            acc = acc.kron(f)?;
        }
        Ok(acc)
    }

    fn kron(&self, other: &DetectorPovm) -> Result<Self> {
        let n = self.num_qubits + other.num_qubits;
        let mut elements = BTreeMap::new();
        for (abits, at) in &self.elements {
            for (bbits, bt) in &other.elements {
                let mut coeffs = vec![0.0; 4usize.pow(n as u32)];
                let blen = 4usize.pow(other.num_qubits as u32);
                for (ia, ca) in at.coeffs().iter().enumerate() {
                    if *ca == 0.0 {
                        continue;
                    }
                    for (ib, cb) in bt.coeffs().iter().enumerate() {
                        coeffs[ia * blen + ib] = ca * cb;
                    }
                }
                elements.insert(
                    format!("{abits}{bbits}"),
                    PauliCoeffTensor::new(n, coeffs)?,
                );
            }
        }
        Self::new(n, elements)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn element(&self, bits: &str) -> Result<&PauliCoeffTensor> {
        self.elements
            .get(bits)
            .ok_or_else(|| QdtError::MissingOutcome(bits.to_string()))
    }

    /// Outcome/element pairs in ascending bitstring order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &PauliCoeffTensor)> {
        self.elements.iter()
    }

    pub fn outcomes(&self) -> Vec<String> {
        self.elements.keys().cloned().collect()
    }

    /// The a-vector of a single-qubit detector's "0" element.
    pub fn avector(&self) -> Result<AVector> {
        if self.num_qubits != 1 {
            return Err(QdtError::NotSingleQubit(self.num_qubits));
        }
        AVector::from_tensor(self.element("0")?)
    }

    /// Replaces one element; shape must match.
    pub fn set_element(&mut self, bits: &str, tensor: PauliCoeffTensor) -> Result<()> {
        if tensor.num_qubits() != self.num_qubits {
            return Err(QdtError::CoeffLengthMismatch {
                num_qubits: self.num_qubits,
                expected: 4usize.pow(self.num_qubits as u32),
                found: tensor.coeffs().len(),
            });
        }
        match self.elements.get_mut(bits) {
            Some(slot) => {
                *slot = tensor;
                Ok(())
            }
            None => Err(QdtError::MissingOutcome(bits.to_string())),
        }
    }
}

/// Ideal computational-basis detector: projector `|n><n|` per outcome,
/// written as the tensor product of `(1 + (-1)^{n_j} sigma_z)/2`.
pub fn ideal_computational_povm(num_qubits: usize) -> DetectorPovm {
    let zero = AVector::new(0.5, 0.0, 0.0, 0.5);
    let factor = DetectorPovm::from_avector(zero);
    let factors = vec![factor; num_qubits];
    DetectorPovm::product(&factors).expect("product of valid factors")
}

/// Numeric validity of a POVM at a given tolerance.
#[derive(Clone, Copy, Debug)]
pub struct PovmValidityReport {
    /// Frobenius norm of `sum_n Pi^(n) - 1`.
    pub completeness_residual: f64,
    /// Smallest eigenvalue over all elements.
    pub min_eigenvalue: f64,
    pub is_valid: bool,
}

/// Checks completeness and positivity of a POVM.
///
/// The completeness residual uses the Pauli-space closed form
/// `||sum Pi - 1||_F = sqrt(2^N * sum_I dc_I^2)`; eigenvalues come from the
/// dense eigensolver on each reconstructed element.
pub fn check_povm(p: &DetectorPovm, tol: f64) -> PovmValidityReport {
    let n = p.num_qubits();
    let len = 4usize.pow(n as u32);
    let mut sum = vec![0.0f64; len];
    let mut min_eigenvalue = f64::INFINITY;
    for (_, tensor) in p.iter() {
        for (i, c) in tensor.coeffs().iter().enumerate() {
            sum[i] += c;
        }
        let m = pauli_reconstruct(tensor);
        let eig = herm_eig(&m).expect("POVM elements are Hermitian by representation");
        min_eigenvalue = min_eigenvalue.min(eig.eigenvalues[0]);
    }
    sum[0] -= 1.0;
    let dim = (1usize << n) as f64;
    let completeness_residual = (dim * sum.iter().map(|c| c * c).sum::<f64>()).sqrt();
    PovmValidityReport {
        completeness_residual,
        min_eigenvalue,
        is_valid: completeness_residual <= tol && min_eigenvalue >= -tol,
    }
}

/// Errors unless the POVM passes [`check_povm`] at the default tolerance.
pub fn ensure_valid(p: &DetectorPovm) -> Result<()> {
    let report = check_povm(p, DEFAULT_VALIDITY_TOL);
    if report.is_valid {
        Ok(())
    } else {
        Err(QdtError::InvalidPovm {
            completeness_residual: report.completeness_residual,
            min_eigenvalue: report.min_eigenvalue,
        })
    }
}

/// Conditioned detector on a qubit subset: sums the POVM over outcomes of the
/// discarded qubits and partial-traces them out,
/// `Pi_keep = Tr_traced( sum_{n_traced} Pi ) / 2^(N-K)`.
///
/// In Pauli coefficients the trace and the normalization cancel: the kept
/// element's coefficient at multi-index `I_keep` is the sum, over discarded
/// outcomes, of the input coefficient at `I_keep` embedded with identity on
/// every discarded qubit.  Completeness of the result is automatic.
///
/// `keep` must be strictly ascending and a nonempty proper subset; asking to
/// keep every qubit is rejected with [`QdtError::ReduceKeepAll`] so callers
/// notice the no-op.
pub fn reduce_detector(p: &DetectorPovm, keep: &[usize]) -> Result<DetectorPovm> {
    let n = p.num_qubits();
    if keep.is_empty() {
        return Err(QdtError::BadQubitSubset("empty keep set".into()));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QdtError::BadQubitSubset(format!(
            "keep set {keep:?} is not strictly ascending"
        )));
    }
    if *keep.last().unwrap() >= n {
        return Err(QdtError::BadQubitSubset(format!(
            "qubit {} out of range for {n} qubits",
            keep.last().unwrap()
        )));
    }
    if keep.len() == n {
        return Err(QdtError::ReduceKeepAll);
    }
    let k = keep.len();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let t = traced.len();

    // Full base-4 index with `digits` placed on kept qubits, identity on the
    // rest.
    let embed = |kept_index: usize| -> usize {
        let mut full = 0usize;
        for (pos, &q) in keep.iter().enumerate() {
            let digit = PauliCoeffTensor::digit(kept_index, k, pos);
            full |= digit << (2 * (n - 1 - q));
        }
        full
    };
    // Full outcome bitstring from kept bits and traced bits.
    let assemble_bits = |kept_bits: usize, traced_bits: usize| -> String {
        let mut full = vec!['0'; n];
        for (pos, &q) in keep.iter().enumerate() {
            if (kept_bits >> (k - 1 - pos)) & 1 == 1 {
                full[q] = '1';
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if (traced_bits >> (t - 1 - pos)) & 1 == 1 {
                full[q] = '1';
            }
        }
        full.into_iter().collect()
    };

    let mut elements = BTreeMap::new();
    for kept_bits in 0..1usize << k {
        let mut coeffs = vec![0.0f64; 4usize.pow(k as u32)];
        for traced_bits in 0..1usize << t {
            let source = p.element(&assemble_bits(kept_bits, traced_bits))?;
            for (kept_index, slot) in coeffs.iter_mut().enumerate() {
                *slot += source.get(embed(kept_index));
            }
        }
        elements.insert(
            index_to_bits(kept_bits, k),
            PauliCoeffTensor::new(k, coeffs)?,
        );
    }
    DetectorPovm::new(k, elements)
}

/// Euclidean distance between two single-qubit detectors, taken on the
/// a-vector of the "0" element (the "1" element is fixed by completeness and
/// adds no information).
pub fn detector_distance(a: &DetectorPovm, b: &DetectorPovm) -> Result<f64> {
    Ok(a.avector()?.distance(&b.avector()?))
}

/// Singular values, per outcome, of the 4x4 coefficient matrix
/// `c_{i,j}^(n0,n1)` of a two-qubit detector.  A product element has exactly
/// one nonzero singular value; any second singular value measures how far the
/// element is from separable.
pub fn separability_singular_values(p: &DetectorPovm) -> Result<BTreeMap<String, [f64; 4]>> {
    if p.num_qubits() != 2 {
        return Err(QdtError::NotTwoQubit(p.num_qubits()));
    }
    let mut out = BTreeMap::new();
    for (bits, tensor) in p.iter() {
        // Row index = qubit-0 digit, column = qubit-1 digit; the base-4
        // coefficient order is exactly row-major for that split.
        let sv = singular_values(4, 4, tensor.coeffs());
        out.insert(bits.clone(), [sv[0], sv[1], sv[2], sv[3]]);
    }
    Ok(out)
}
