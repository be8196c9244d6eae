//! Dense complex matrices and the Pauli-basis machinery everything else is
//! built on.
//!
//! Matrices are square with power-of-two dimension (operators on N qubits)
//! and stored row-major.  Eigendecomposition uses a cyclic Jacobi sweep over
//! complex Hermitian matrices; singular values come from one-sided Jacobi on
//! real rectangular matrices.  Both are self-contained so the numerics here
//! have no external linkage requirements and behave identically everywhere.

use num_complex::Complex;

use crate::error::{QdtError, Result};

pub type Complex64 = Complex<f64>;

/// Square complex matrix of power-of-two dimension, row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating the shape.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if !dim.is_power_of_two() {
            return Err(QdtError::DimNotPowerOfTwo(dim));
        }
        if entries.len() != dim * dim {
            return Err(QdtError::EntryCountMismatch {
                dim,
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "dimension must be a power of two");
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            dim: self.dim,
            entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            dim: self.dim,
            entries,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    /// `self += factor * other`, used in the hot accumulation loops of the
    /// likelihood iteration.
    pub fn add_scaled(&mut self, factor: f64, other: &Self) -> Result<()> {
        self.check_same_dim(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += a * other.entries[k * n + c];
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                out[c * n + r] = self.entries[r * n + c].conj();
            }
        }
        Self {
            dim: n,
            entries: out,
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// Largest entry magnitude of `self - self†`; zero for exactly Hermitian
    /// matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                let d = (self.entries[r * n + c] - self.entries[c * n + r].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Averages the matrix with its conjugate transpose.
    pub fn symmetrize(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                let v = (self.entries[r * n + c] + self.entries[c * n + r].conj()) * 0.5;
                out.entries[r * n + c] = v;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Kronecker product; `self` supplies the most significant (leftmost)
    /// factor, matching the qubit-0-first ordering used throughout.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
        for ar in 0..n {
            for ac in 0..n {
                let a = self.entries[ar * n + ac];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for br in 0..m {
                    for bc in 0..m {
                        out[(ar * m + br) * dim + (ac * m + bc)] = a * other.entries[br * m + bc];
                    }
                }
            }
        }
        Self { dim, entries: out }
    }

    /// Traces out the listed qubits (qubit 0 being the most significant bit of
    /// the row/column index), returning the operator on the remaining ones.
    pub fn partial_trace(&self, num_qubits: usize, traced: &[usize]) -> Result<Self> {
        if self.dim != 1usize << num_qubits {
            return Err(QdtError::QubitDimMismatch {
                dim: self.dim,
                num_qubits,
            });
        }
        let mut seen = vec![false; num_qubits];
        for &q in traced {
            if q >= num_qubits {
                return Err(QdtError::InvalidTrace(format!(
                    "qubit {q} out of range for {num_qubits} qubits"
                )));
            }
            if seen[q] {
                return Err(QdtError::InvalidTrace(format!("qubit {q} listed twice")));
            }
            seen[q] = true;
        }
        let kept: Vec<usize> = (0..num_qubits).filter(|q| !seen[*q]).collect();
        if kept.is_empty() {
            return Err(QdtError::InvalidTrace(
                "tracing out every qubit leaves a scalar, not an operator".into(),
            ));
        }
        let kn = kept.len();
        let tn = num_qubits - kn;
        let traced_sorted: Vec<usize> = (0..num_qubits).filter(|q| seen[*q]).collect();

        // Map an index over the kept qubits plus an index over the traced
        // qubits back to a full 2^N index.  Bit j of a full index corresponds
        // to qubit j counted from the most significant end.
        let assemble = |kept_bits: usize, traced_bits: usize| -> usize {
            let mut full = 0usize;
            for (pos, &q) in kept.iter().enumerate() {
                let bit = (kept_bits >> (kn - 1 - pos)) & 1;
                full |= bit << (num_qubits - 1 - q);
            }
            for (pos, &q) in traced_sorted.iter().enumerate() {
                let bit = (traced_bits >> (tn - 1 - pos)) & 1;
                full |= bit << (num_qubits - 1 - q);
            }
            full
        };

        let out_dim = 1usize << kn;
        let mut out = ComplexMatrix::zeros(out_dim);
        for r in 0..out_dim {
            for c in 0..out_dim {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..(1usize << tn) {
                    acc += self.get(assemble(r, t), assemble(c, t));
                }
                out.set(r, c, acc);
            }
        }
        Ok(out)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(QdtError::DimMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    Ok(a.sub(b)?.frobenius_norm())
}

/// Real coefficients of an N-qubit Hermitian operator in the Pauli product
/// basis.  Index `i` decodes base-4 as `(i_0, ..., i_{N-1})` with qubit 0 in
/// the most significant position and digits 0..4 meaning I, X, Y, Z.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliCoeffTensor {
    num_qubits: usize,
    coeffs: Vec<f64>,
}

impl PauliCoeffTensor {
    pub fn new(num_qubits: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = 4usize.pow(num_qubits as u32);
        if coeffs.len() != expected {
            return Err(QdtError::CoeffLengthMismatch {
                num_qubits,
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self { num_qubits, coeffs })
    }

    pub fn zeros(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            coeffs: vec![0.0; 4usize.pow(num_qubits as u32)],
        }
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    pub fn get(&self, index: usize) -> f64 {
        self.coeffs[index]
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: f64) {
        self.coeffs[index] = value;
    }

    /// Digit of `index` for the given qubit (0 = I, 1 = X, 2 = Y, 3 = Z).
    pub fn digit(index: usize, num_qubits: usize, qubit: usize) -> usize {
        (index >> (2 * (num_qubits - 1 - qubit))) & 3
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.num_qubits != other.num_qubits {
            return Err(QdtError::DimMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            num_qubits: self.num_qubits,
            coeffs,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            num_qubits: self.num_qubits,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Euclidean distance between two coefficient tensors.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.num_qubits != other.num_qubits {
            return Err(QdtError::DimMismatch {
                left: self.num_qubits,
                right: other.num_qubits,
            });
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }
}

/// Entry (r, c) of the single-qubit Pauli matrix `which` (0..4), with r and c
/// in {0, 1}.
#[inline]
fn pauli_entry(which: usize, r: usize, c: usize) -> Complex64 {
    match (which, r, c) {
        (0, 0, 0) | (0, 1, 1) => Complex64::new(1.0, 0.0),
        (1, 0, 1) | (1, 1, 0) => Complex64::new(1.0, 0.0),
        (2, 0, 1) => Complex64::new(0.0, -1.0),
        (2, 1, 0) => Complex64::new(0.0, 1.0),
        (3, 0, 0) => Complex64::new(1.0, 0.0),
        (3, 1, 1) => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 0.0),
    }
}

/// Bitmask of qubits on which the Pauli string `index` acts with X or Y; the
/// string's only nonzero entries sit at column = row XOR mask.
fn x_mask(index: usize, num_qubits: usize) -> usize {
    let mut mask = 0usize;
    for q in 0..num_qubits {
        let d = PauliCoeffTensor::digit(index, num_qubits, q);
        if d == 1 || d == 2 {
            mask |= 1 << (num_qubits - 1 - q);
        }
    }
    mask
}

/// Value of the Pauli string `index` at entry (row, col); zero unless
/// `col == row ^ x_mask`.
fn pauli_string_entry(index: usize, num_qubits: usize, row: usize, col: usize) -> Complex64 {
    let mut v = Complex64::new(1.0, 0.0);
    for q in 0..num_qubits {
        let d = PauliCoeffTensor::digit(index, num_qubits, q);
        let rb = (row >> (num_qubits - 1 - q)) & 1;
        let cb = (col >> (num_qubits - 1 - q)) & 1;
        let e = pauli_entry(d, rb, cb);
        if e.norm_sqr() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        v *= e;
    }
    v
}

/// Dense matrix of the Pauli string `index` on `num_qubits` qubits.
pub fn pauli_string_matrix(index: usize, num_qubits: usize) -> ComplexMatrix {
    let dim = 1usize << num_qubits;
    let mask = x_mask(index, num_qubits);
    let mut m = ComplexMatrix::zeros(dim);
    for r in 0..dim {
        let c = r ^ mask;
        m.set(r, c, pauli_string_entry(index, num_qubits, r, c));
    }
    m
}

/// Projects a Hermitian operator onto the Pauli product basis:
/// `c_I = Tr(M sigma_I) / 2^N`.
///
/// For Hermitian input every coefficient is real; an imaginary part above
/// 1e-8 means the input was not Hermitian and is rejected.
pub fn pauli_expand(m: &ComplexMatrix, num_qubits: usize) -> Result<PauliCoeffTensor> {
    let dim = 1usize << num_qubits;
    if m.dim() != dim {
        return Err(QdtError::QubitDimMismatch {
            dim: m.dim(),
            num_qubits,
        });
    }
    let norm = 1.0 / dim as f64;
    let mut out = PauliCoeffTensor::zeros(num_qubits);
    for index in 0..4usize.pow(num_qubits as u32) {
        let mask = x_mask(index, num_qubits);
        // Tr(M sigma_I) touches one entry of M per row of sigma_I.
        let mut tr = Complex64::new(0.0, 0.0);
        for c in 0..dim {
            let r = c ^ mask;
            tr += m.get(c, r) * pauli_string_entry(index, num_qubits, r, c);
        }
        if (tr.im * norm).abs() > 1e-8 {
            return Err(QdtError::NotHermitian {
                magnitude: (tr.im * norm).abs(),
            });
        }
        out.set(index, tr.re * norm);
    }
    Ok(out)
}

/// Rebuilds the dense operator `sum_I c_I sigma_I` from its Pauli
/// coefficients.
pub fn pauli_reconstruct(c: &PauliCoeffTensor) -> ComplexMatrix {
    let n = c.num_qubits();
    let dim = 1usize << n;
    let mut m = ComplexMatrix::zeros(dim);
    for index in 0..4usize.pow(n as u32) {
        let coeff = c.get(index);
        if coeff == 0.0 {
            continue;
        }
        let mask = x_mask(index, n);
        for r in 0..dim {
            let col = r ^ mask;
            let v = m.get(r, col) + coeff * pauli_string_entry(index, n, r, col);
            m.set(r, col, v);
        }
    }
    m
}

/// Eigendecomposition of a Hermitian matrix: `eigenvalues[k]` (ascending)
/// pairs with column k of `eigenvectors`.
#[derive(Clone, Debug)]
pub struct HermEigDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

/// Tolerated Hermiticity defect, relative to scale, before `herm_eig` rejects
/// its input.
const HERMITICITY_TOL: f64 = 1e-10;

/// Eigendecomposition by cyclic Jacobi rotations.
///
/// Each sweep annihilates every off-diagonal pair through a complex Givens
/// rotation; convergence is declared when the off-diagonal Frobenius mass
/// drops below `1e-12` times the matrix norm.  The rotation count is capped at
/// `1e4 * dim` — hitting the cap is reported as non-convergence rather than
/// silently returning a partial diagonalization.
pub fn herm_eig(m: &ComplexMatrix) -> Result<HermEigDecomp> {
    let n = m.dim();
    let scale = m.frobenius_norm();
    if m.hermiticity_defect() > HERMITICITY_TOL * scale.max(1.0) {
        return Err(QdtError::NotHermitian {
            magnitude: m.hermiticity_defect(),
        });
    }
    let mut a = m.symmetrize();
    let mut v = ComplexMatrix::identity(n);
    let tol = 1e-12 * scale;
    let max_rotations = 10_000 * n;
    let mut rotations = 0usize;

    loop {
        let mut off = 0.0f64;
        for r in 0..n {
            for c in (r + 1)..n {
                off += a.get(r, c).norm_sqr();
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= tol || scale == 0.0 {
            break;
        }
        if rotations >= max_rotations {
            return Err(QdtError::EigNonConvergence { residual: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                rotations += 1;
                let phase = apq / mag;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                let pc = phase.conj();
                // Columns p, q of A and of the accumulated eigenvector matrix.
                for k in 0..n {
                    let (tp, tq) = (a.get(k, p), a.get(k, q));
                    a.set(k, p, cos * tp - sin * pc * tq);
                    a.set(k, q, sin * tp + cos * pc * tq);
                    let (vp, vq) = (v.get(k, p), v.get(k, q));
                    v.set(k, p, cos * vp - sin * pc * vq);
                    v.set(k, q, sin * vp + cos * pc * vq);
                }
                // Rows p, q of A.
                for k in 0..n {
                    let (tp, tq) = (a.get(p, k), a.get(q, k));
                    a.set(p, k, cos * tp - sin * phase * tq);
                    a.set(q, k, sin * tp + cos * phase * tq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.partial_cmp(&a.get(j, j).re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i).re).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n);
    for (dest, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors.set(k, dest, v.get(k, src));
        }
    }
    Ok(HermEigDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Inverse square root of a positive semidefinite matrix.
///
/// Eigenvalues below `floor` are clamped to `floor` before inversion so that
/// near-singular directions produce a large-but-finite response instead of
/// infinities; genuinely negative spectrum (below `-1e-8`) is rejected.
pub fn inv_sqrt_psd(m: &ComplexMatrix, floor: f64) -> Result<ComplexMatrix> {
    let decomp = herm_eig(m)?;
    let min = decomp
        .eigenvalues
        .first()
        .copied()
        .unwrap_or(0.0);
    if min < -1e-8 {
        return Err(QdtError::NotPsd {
            min_eigenvalue: min,
        });
    }
    let n = m.dim();
    let v = &decomp.eigenvectors;
    let mut out = ComplexMatrix::zeros(n);
    for (k, &lambda) in decomp.eigenvalues.iter().enumerate() {
        let w = 1.0 / lambda.max(floor).sqrt();
        for r in 0..n {
            for c in 0..n {
                let term = v.get(r, k) * v.get(c, k).conj() * w;
                out.set(r, c, out.get(r, c) + term);
            }
        }
    }
    Ok(out)
}

/// Singular values of a real `rows x cols` matrix (row-major), descending.
///
/// One-sided Jacobi: orthogonalize column pairs of the tall orientation until
/// every pair's inner product is negligible against the column norms, then
/// read the singular values off as column lengths.
pub fn singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
    // Work on the tall orientation; singular values are transpose-invariant.
    let (m, n, col_major) = if rows >= cols {
        let mut cm = vec![0.0f64; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                cm[c * rows + r] = data[r * cols + c];
            }
        }
        (rows, cols, cm)
    } else {
        // Transpose: columns of A^T are rows of A.
        let mut cm = vec![0.0f64; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                cm[r * cols + c] = data[r * cols + c];
            }
        }
        (cols, rows, cm)
    };
    let mut a = col_major;
    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut aii, mut ajj, mut aij) = (0.0f64, 0.0f64, 0.0f64);
                for k in 0..m {
                    let x = a[i * m + k];
                    let y = a[j * m + k];
                    aii += x * x;
                    ajj += y * y;
                    aij += x * y;
                }
                if aij.abs() <= eps * (aii * ajj).sqrt() || aii == 0.0 || ajj == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (ajj - aii) / (2.0 * aij);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let x = a[i * m + k];
                    let y = a[j * m + k];
                    a[i * m + k] = c * x - s * y;
                    a[j * m + k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n)
        .map(|i| (0..m).map(|k| a[i * m + k] * a[i * m + k]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}
