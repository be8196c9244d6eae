//! Readout-error mitigation through the detector's response matrix.
//!
//! For diagonal-dominant detectors the observed distribution relates to the
//! ideal one linearly, P_obs = M * P_ideal, with
//!
//! ```text
//! M_{n;m} = prod_j ( a0_j^(n_j) + (-1)^{m_j} a3_j^(n_j) )
//! ```
//!
//! built from each qubit's a-vector, or — when inter-qubit correlations
//! matter — with the crosstalk-aware variant that keeps every identity/
//! sigma_z Pauli coefficient of the joint POVM.  Recovery of P_ideal comes in
//! two flavors: direct inversion with clipping of negative components, and a
//! least-squares fit constrained to the probability simplex (projected
//! gradient with exact simplex projection).  The sigma_x/sigma_y detector
//! components that both constructions drop can be physically cancelled by
//! averaging over the Pauli-Z twirl circuit family, also provided here.

use crate::detector::{bits_to_index, AVector, DetectorPovm};
use crate::error::{QdtError, Result};
use crate::tensor::{singular_values, Complex64, ComplexMatrix, PauliCoeffTensor};

/// Left-stochastic map from ideal to observed outcome distributions.
/// Row index = observed bitstring, column index = ideal bitstring, both in
/// canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMatrix {
    num_qubits: usize,
    /// Row-major, dimension 2^N x 2^N.
    entries: Vec<f64>,
    /// Set when any entry is below -1e-10; only the crosstalk construction
    /// can produce that.
    pub has_negative_entries: bool,
    /// Total |coefficient| weight on Pauli indices outside {identity,
    /// sigma_z}^N, i.e. the detector features the response-matrix picture
    /// cannot see.  Zero for the a-vector construction.
    pub excluded_weight: f64,
}

impl ResponseMatrix {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.num_qubits
    }

    #[inline]
    pub fn get(&self, observed: usize, ideal: usize) -> f64 {
        self.entries[observed * self.dim() + ideal]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Observed distribution predicted for an ideal one: y = M x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; d];
        for r in 0..d {
            for c in 0..d {
                y[r] += self.entries[r * d + c] * x[c];
            }
        }
        y
    }

    /// M^T x, the adjoint map used in gradients.
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; d];
        for r in 0..d {
            for c in 0..d {
                y[c] += self.entries[r * d + c] * x[r];
            }
        }
        y
    }

    /// Ratio of largest to smallest singular value.
    pub fn condition_number(&self) -> f64 {
        let d = self.dim();
        let sv = singular_values(d, d, &self.entries);
        if sv[d - 1] <= 0.0 {
            f64::INFINITY
        } else {
            sv[0] / sv[d - 1]
        }
    }

    pub fn largest_singular_value(&self) -> f64 {
        let d = self.dim();
        singular_values(d, d, &self.entries)[0]
    }

    fn from_entries(num_qubits: usize, entries: Vec<f64>, excluded_weight: f64) -> Self {
        let has_negative_entries = entries.iter().any(|&e| e < -1e-10);
        Self {
            num_qubits,
            entries,
            has_negative_entries,
            excluded_weight,
        }
    }

    /// Rebuilds a matrix from stored entries, enforcing shape and the
    /// left-stochastic column invariant.
    pub fn from_parts(
        num_qubits: usize,
        entries: Vec<f64>,
        excluded_weight: f64,
    ) -> Result<Self> {
        let d = 1usize << num_qubits;
        if entries.len() != d * d {
            return Err(QdtError::EntryCountMismatch {
                dim: d,
                expected: d * d,
                found: entries.len(),
            });
        }
        for c in 0..d {
            let sum: f64 = (0..d).map(|r| entries[r * d + c]).sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(QdtError::CompletenessViolation {
                    residual: (sum - 1.0).abs(),
                });
            }
        }
        Ok(Self::from_entries(num_qubits, entries, excluded_weight))
    }
}

/// Builds the product response matrix from per-qubit a-vector pairs
/// `(a^(0), a^(1))`.  The a1/a2 components are ignored by construction; each
/// pair must satisfy completeness `a^(0) + a^(1) = (1,0,0,0)`.
pub fn build_response_matrix(avectors: &[(AVector, AVector)]) -> Result<ResponseMatrix> {
    assert!(!avectors.is_empty(), "need at least one qubit");
    let mut entries = vec![1.0f64];
    let mut dim = 1usize;
    for (a0, a1) in avectors {
        let residual = ((a0.a0 + a1.a0 - 1.0).powi(2)
            + (a0.a1 + a1.a1).powi(2)
            + (a0.a2 + a1.a2).powi(2)
            + (a0.a3 + a1.a3).powi(2))
        .sqrt();
        if residual > 1e-8 {
            return Err(QdtError::CompletenessViolation { residual });
        }
        // Per-qubit 2x2 block: rows observed, columns ideal.
        let block = [
            a0.a0 + a0.a3, // observe 0 | ideal 0
            a0.a0 - a0.a3, // observe 0 | ideal 1
            a1.a0 + a1.a3, // observe 1 | ideal 0
            a1.a0 - a1.a3, // observe 1 | ideal 1
        ];
        // Kronecker with the accumulated matrix; earlier qubits are the most
        // significant index bits.
        let new_dim = dim * 2;
        let mut next = vec![0.0f64; new_dim * new_dim];
        for r in 0..dim {
            for c in 0..dim {
                let base = entries[r * dim + c];
                for br in 0..2 {
                    for bc in 0..2 {
                        next[(r * 2 + br) * new_dim + (c * 2 + bc)] =
                            base * block[br * 2 + bc];
                    }
                }
            }
        }
        entries = next;
        dim = new_dim;
    }
    Ok(ResponseMatrix::from_entries(
        avectors.len(),
        entries,
        0.0,
    ))
}

/// Crosstalk-aware response matrix of an arbitrary POVM:
/// `M_{n;m} = sum_{I in {0,3}^N} c_I^(n) * (-1)^(m . I/3)`.
///
/// Only identity/sigma_z Pauli coefficients enter; the total magnitude of
/// the discarded (x/y-type) coefficients is reported on the result as
/// `excluded_weight`, quantifying how much detector the diagonal model
/// misses.
pub fn build_response_matrix_crosstalk(p: &DetectorPovm) -> Result<ResponseMatrix> {
    crate::detector::ensure_valid(p)?;
    let n = p.num_qubits();
    let d = 1usize << n;
    let mut entries = vec![0.0f64; d * d];
    let mut excluded = 0.0f64;
    for (bits, tensor) in p.iter() {
        let row = bits_to_index(bits)?;
        for (index, &coeff) in tensor.coeffs().iter().enumerate() {
            // Split the base-4 index into its {I, Z} support mask, or note
            // its weight as excluded if any digit is X or Y.
            let mut zmask = 0usize;
            let mut diagonal = true;
            for q in 0..n {
                match PauliCoeffTensor::digit(index, n, q) {
                    0 => {}
                    3 => zmask |= 1 << (n - 1 - q),
                    _ => {
                        diagonal = false;
                        break;
                    }
                }
            }
            if !diagonal {
                excluded += coeff.abs();
                continue;
            }
            for m in 0..d {
                let sign = if (m & zmask).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                entries[row * d + m] += coeff * sign;
            }
        }
    }
    Ok(ResponseMatrix::from_entries(n, entries, excluded))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MitigationMethod {
    InversionCutoff,
    LeastSquares,
}

/// A corrected distribution plus the numerics that produced it.
#[derive(Clone, Debug)]
pub struct MitigationResult {
    /// Recovered ideal distribution, canonical outcome order; nonnegative,
    /// sums to 1.
    pub corrected: Vec<f64>,
    pub method: MitigationMethod,
    /// Final ||M * corrected - p_tilde||_2.
    pub residual: f64,
    /// Solver iterations (0 for inversion).
    pub iterations: usize,
    pub converged: bool,
    /// Norm of the projected gradient at the last iterate (0 for inversion).
    pub projected_gradient_norm: f64,
    /// Worst KKT violation at the least-squares solution, when applicable:
    /// support coordinates should share one Lagrange multiplier and inactive
    /// coordinates must not descend below it.
    pub kkt_residual: Option<f64>,
}

fn checked_distribution(p_tilde: &[f64], dim: usize) -> Result<Vec<f64>> {
    if p_tilde.len() != dim {
        return Err(QdtError::BadDistribution(format!(
            "expected {dim} components, got {}",
            p_tilde.len()
        )));
    }
    let mut p = Vec::with_capacity(dim);
    for &v in p_tilde {
        if v < -1e-10 {
            return Err(QdtError::BadDistribution(format!(
                "negative component {v}"
            )));
        }
        p.push(v.max(0.0));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(QdtError::BadDistribution(format!("components sum to {sum}")));
    }
    for v in &mut p {
        *v /= sum;
    }
    Ok(p)
}

/// Solves M x = b by Gaussian elimination with partial pivoting.
fn solve_dense(dim: usize, matrix: &[f64], b: &[f64]) -> Vec<f64> {
    let mut a = matrix.to_vec();
    let mut x = b.to_vec();
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&r1, &r2| {
                a[r1 * dim + col]
                    .abs()
                    .partial_cmp(&a[r2 * dim + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot_row != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot_row * dim + k);
            }
            x.swap(col, pivot_row);
        }
        let pivot = a[col * dim + col];
        for row in (col + 1)..dim {
            let factor = a[row * dim + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..dim {
                a[row * dim + k] -= factor * a[col * dim + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..dim).rev() {
        x[col] /= a[col * dim + col];
        for row in 0..col {
            let factor = a[row * dim + col];
            x[row] -= factor * x[col];
        }
    }
    x
}

/// Condition number above which inversion-based mitigation refuses to run;
/// the least-squares path has no such limit.
pub const INVERSION_CONDITION_LIMIT: f64 = 1e8;

/// Recovers the ideal distribution by inverting the response matrix, then
/// clipping negative components to zero and renormalizing.
pub fn mitigate_inversion(m: &ResponseMatrix, p_tilde: &[f64]) -> Result<MitigationResult> {
    let dim = m.dim();
    let p_tilde = checked_distribution(p_tilde, dim)?;
    let condition = m.condition_number();
    if !condition.is_finite() || condition > INVERSION_CONDITION_LIMIT {
        return Err(QdtError::IllConditioned { condition });
    }
    let raw = solve_dense(dim, m.entries(), &p_tilde);
    let mut corrected: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = corrected.iter().sum();
    if sum <= 0.0 {
        return Err(QdtError::BadDistribution(
            "inversion clipped every component to zero".into(),
        ));
    }
    for v in &mut corrected {
        *v /= sum;
    }
    let predicted = m.apply(&corrected);
    let residual = predicted
        .iter()
        .zip(&p_tilde)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(MitigationResult {
        corrected,
        method: MitigationMethod::InversionCutoff,
        residual,
        iterations: 0,
        converged: true,
        projected_gradient_norm: 0.0,
        kkt_residual: None,
    })
}

/// Exact Euclidean projection onto the probability simplex (sort-based).
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Least-squares mitigation: minimize ||M P - p_tilde||^2 over the simplex.
///
/// Monotone accelerated projected gradient (a FISTA variant that never lets
/// the objective increase) with step 1/L, L the squared largest singular
/// value of M.  Terminates when the projected-gradient norm falls below
/// `tol`; the returned result carries the KKT residual of the final iterate
/// so callers can audit optimality.
pub fn mitigate_lsq(
    m: &ResponseMatrix,
    p_tilde: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<MitigationResult> {
    let dim = m.dim();
    let p_tilde = checked_distribution(p_tilde, dim)?;
    let lipschitz = m.largest_singular_value().powi(2);
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);

    let objective = |x: &[f64]| -> f64 {
        m.apply(x)
            .iter()
            .zip(&p_tilde)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    let gradient = |x: &[f64]| -> Vec<f64> {
        let mut r = m.apply(x);
        for (ri, pi) in r.iter_mut().zip(&p_tilde) {
            *ri -= pi;
        }
        // grad of ||Mx - p||^2 is 2 M^T (Mx - p); the 2 is absorbed: we use
        // f = 1/2 ||.||^2 scaling consistently via step on M^T r.
        m.apply_transpose(&r)
    };
    let projected_gradient_norm = |x: &[f64], g: &[f64]| -> f64 {
        let moved: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi - step * gi).collect();
        let proj = project_to_simplex(&moved);
        proj.iter()
            .zip(x)
            .map(|(p, xi)| ((xi - p) / step).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut x = project_to_simplex(&p_tilde);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut fx = objective(&x);
    let mut iterations = 0;
    let mut converged = false;
    let mut pg_norm = projected_gradient_norm(&x, &gradient(&x));
    if pg_norm <= tol {
        converged = true;
    }

    while !converged && iterations < max_iters {
        iterations += 1;
        let gy = gradient(&y);
        let z: Vec<f64> = project_to_simplex(
            &y.iter().zip(&gy).map(|(yi, gi)| yi - step * gi).collect::<Vec<_>>(),
        );
        let fz = objective(&z);
        if fz <= fx {
            // Accelerated candidate improves the objective: accept it and
            // carry Nesterov momentum forward.
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            for i in 0..dim {
                y[i] = z[i] + ((t - 1.0) / t_next) * (z[i] - x[i]);
            }
            x = z;
            fx = fz;
            t = t_next;
        } else {
            // Monotone guard: the overshooting momentum is discarded and
            // restarted from the best iterate, so the objective never
            // increases.  The next pass is then a plain projected-gradient
            // step from x, which cannot fail to descend at step 1/L.
            y = x.clone();
            t = 1.0;
        }

        pg_norm = projected_gradient_norm(&x, &gradient(&x));
        if pg_norm <= tol {
            converged = true;
        }
    }

    // KKT audit: on the support the gradient should be constant (the
    // multiplier); off the support it must not dip below that constant.
    let g = gradient(&x);
    let support: Vec<usize> = (0..dim).filter(|&i| x[i] > 0.0).collect();
    let lambda = support.iter().map(|&i| g[i]).sum::<f64>() / support.len().max(1) as f64;
    let mut kkt = 0.0f64;
    for i in 0..dim {
        if x[i] > 0.0 {
            kkt = kkt.max((g[i] - lambda).abs());
        } else {
            kkt = kkt.max((lambda - g[i]).max(0.0));
        }
    }

    let residual = objective(&x).sqrt();
    Ok(MitigationResult {
        corrected: x,
        method: MitigationMethod::LeastSquares,
        residual,
        iterations,
        converged,
        projected_gradient_norm: pg_norm,
        kkt_residual: Some(kkt),
    })
}

/// The Pauli-Z twirl circuit family: one measurement per binary string K,
/// with a Z gate on every qubit whose K-bit is 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwirlPlan {
    pub num_qubits: usize,
    /// All 2^N placement strings in canonical order; the all-zeros string
    /// (the untouched circuit) comes first.
    pub placements: Vec<String>,
}

pub fn twirl_plan(num_qubits: usize) -> TwirlPlan {
    TwirlPlan {
        num_qubits,
        placements: crate::detector::bitstrings(num_qubits),
    }
}

/// Conjugates a density matrix by the Z-string `placement` (entry r,c picks
/// up (-1)^parity of (r xor c) restricted to the flagged qubits).
pub fn conjugate_by_z(rho: &ComplexMatrix, placement: &str) -> Result<ComplexMatrix> {
    let kmask = bits_to_index(placement)?;
    let dim = rho.dim();
    if 1usize << placement.len() != dim {
        return Err(QdtError::DimMismatch {
            left: dim,
            right: 1usize << placement.len(),
        });
    }
    let mut out = rho.clone();
    for r in 0..dim {
        for c in 0..dim {
            if ((r ^ c) & kmask).count_ones() % 2 == 1 {
                out.set(r, c, -Complex64::new(1.0, 0.0) * rho.get(r, c));
            }
        }
    }
    Ok(out)
}

/// Averages the observed distributions of a full twirl family (one per
/// placement, canonical order).  The average cancels every sigma_x/sigma_y
/// component of the detector, leaving exactly the diagonal response-matrix
/// model.
pub fn average_twirled(distributions: &[Vec<f64>]) -> Result<Vec<f64>> {
    if distributions.is_empty() {
        return Err(QdtError::WrongTwirlCount {
            expected: 1,
            found: 0,
        });
    }
    let dim = distributions[0].len();
    if distributions.len() != dim {
        return Err(QdtError::WrongTwirlCount {
            expected: dim,
            found: distributions.len(),
        });
    }
    let mut mean = vec![0.0f64; dim];
    for dist in distributions {
        if dist.len() != dim {
            return Err(QdtError::BadDistribution(format!(
                "distribution length {} != {dim}",
                dist.len()
            )));
        }
        for (m, v) in mean.iter_mut().zip(dist) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= dim as f64;
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{ideal_computational_povm, DetectorPovm};
    use crate::simulator::{born_probabilities, random_povm};
    use crate::states::TestState;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ideal_pair() -> (AVector, AVector) {
        let a = AVector::new(0.5, 0.0, 0.0, 0.5);
        (a, a.complement())
    }

    fn pair_from(a0: f64, a3: f64) -> (AVector, AVector) {
        let a = AVector::new(a0, 0.0, 0.0, a3);
        (a, a.complement())
    }

    #[test]
    fn ideal_detectors_give_identity() {
        let m = build_response_matrix(&[ideal_pair(), ideal_pair()]).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.get(r, c), want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn published_yorktown_column_values() {
        // Parallel-characterization qubit 2 of ibmqx2.
        let m = build_response_matrix(&[pair_from(0.5181, 0.4749)]).unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 0.9930, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(1, 0), 0.0070, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(0, 1), 0.0432, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(1, 1), 0.9568, epsilon = 1e-12);
    }

    #[test]
    fn two_qubit_matrix_is_kron_of_factors() {
        let pa = pair_from(0.52, 0.44);
        let pb = pair_from(0.48, 0.41);
        let ma = build_response_matrix(&[pa]).unwrap();
        let mb = build_response_matrix(&[pb]).unwrap();
        let mab = build_response_matrix(&[pa, pb]).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = ma.get(r >> 1, c >> 1) * mb.get(r & 1, c & 1);
                assert_abs_diff_eq!(mab.get(r, c), expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn columns_sum_to_one() {
        let m =
            build_response_matrix(&[pair_from(0.54, 0.41), pair_from(0.49, 0.455)]).unwrap();
        for c in 0..4 {
            let sum: f64 = (0..4).map(|r| m.get(r, c)).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn completeness_violation_rejected() {
        let a = AVector::new(0.5, 0.0, 0.0, 0.45);
        let broken = AVector::new(0.52, 0.0, 0.0, -0.45); // a0 sums to 1.02
        assert!(matches!(
            build_response_matrix(&[(a, broken)]),
            Err(QdtError::CompletenessViolation { .. })
        ));
    }

    #[test]
    fn crosstalk_matrix_matches_product_construction() {
        let pa = pair_from(0.54, 0.41);
        let pb = pair_from(0.505, 0.47);
        let product = build_response_matrix(&[pa, pb]).unwrap();
        let povm = DetectorPovm::product(&[
            DetectorPovm::from_avector(pa.0),
            DetectorPovm::from_avector(pb.0),
        ])
        .unwrap();
        let hat = build_response_matrix_crosstalk(&povm).unwrap();
        for i in 0..16 {
            assert_abs_diff_eq!(hat.entries()[i], product.entries()[i], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(hat.excluded_weight, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn crosstalk_matrix_of_ideal_is_identity() {
        let hat = build_response_matrix_crosstalk(&ideal_computational_povm(2)).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(hat.get(r, c), want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zz_correlation_shifts_entries_by_its_parity_pattern() {
        // Add eps * sign_n * sigma_z (x) sigma_z to a valid base POVM and
        // watch the response matrix move by exactly eps * sign_n * (-1)^|m|.
        let eps = 0.01;
        let base = {
            let f = DetectorPovm::from_avector(AVector::new(0.52, 0.0, 0.0, 0.42));
            DetectorPovm::product(&[f.clone(), f]).unwrap()
        };
        let signs = [("00", 1.0), ("01", -1.0), ("10", -1.0), ("11", 1.0)];
        let mut elements = BTreeMap::new();
        for (bits, sign) in signs {
            let mut t = base.element(bits).unwrap().clone();
            t.set(15, t.get(15) + sign * eps);
            elements.insert(bits.to_string(), t);
        }
        let bumped = DetectorPovm::new(2, elements).unwrap();

        let m0 = build_response_matrix_crosstalk(&base).unwrap();
        let m1 = build_response_matrix_crosstalk(&bumped).unwrap();
        for (row, (_, sign)) in signs.iter().enumerate() {
            for m in 0..4usize {
                let parity = if m.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let delta = m1.get(row, m) - m0.get(row, m);
                assert_abs_diff_eq!(delta, eps * sign * parity, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn excluded_weight_counts_xy_coefficients() {
        let tilted = DetectorPovm::from_avector(AVector::new(0.5, 0.05, 0.0, 0.42));
        let hat = build_response_matrix_crosstalk(&tilted).unwrap();
        // a1 appears with opposite signs in the two elements: 2 * 0.05.
        assert_abs_diff_eq!(hat.excluded_weight, 0.1, epsilon = 1e-14);
        assert!(!hat.has_negative_entries);
    }

    #[test]
    fn inversion_with_identity_is_identity() {
        let m = build_response_matrix(&[ideal_pair(), ideal_pair()]).unwrap();
        let p_tilde = vec![0.3, 0.25, 0.25, 0.2];
        let r = mitigate_inversion(&m, &p_tilde).unwrap();
        for (got, want) in r.corrected.iter().zip(&p_tilde) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
        assert_eq!(r.iterations, 0);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn inversion_recovers_exact_column() {
        // a0 + a3 = 0.95, a0 - a3 = 0.07 gives the matrix
        // [[0.95, 0.07], [0.05, 0.93]]; feeding it its own first column as
        // the observation must return the vertex e_0.
        let m = build_response_matrix(&[pair_from(0.51, 0.44)]).unwrap();
        assert_abs_diff_eq!(m.get(0, 0), 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(m.get(0, 1), 0.07, epsilon = 1e-12);
        let r = mitigate_inversion(&m, &[0.95, 0.05]).unwrap();
        assert_abs_diff_eq!(r.corrected[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.corrected[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn singular_matrix_rejected() {
        // Both columns identical -> rank 1.
        let m = ResponseMatrix::from_entries(1, vec![0.6, 0.6, 0.4, 0.4], 0.0);
        assert!(matches!(
            mitigate_inversion(&m, &[0.6, 0.4]),
            Err(QdtError::IllConditioned { .. })
        ));
    }

    #[test]
    fn lsq_recovers_vertex_exactly() {
        let m = build_response_matrix(&[pair_from(0.51, 0.44)]).unwrap();
        let p_tilde = m.apply(&[0.0, 1.0]);
        let r = mitigate_lsq(&m, &p_tilde, 1e-10, 100_000).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.corrected[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.corrected[1], 1.0, epsilon = 1e-8);
        assert!(r.kkt_residual.unwrap() < 1e-9);
    }

    #[test]
    fn lsq_matches_inversion_on_interior_solution() {
        let m =
            build_response_matrix(&[pair_from(0.54, 0.41), pair_from(0.52, 0.46)]).unwrap();
        let truth = [0.4, 0.1, 0.2, 0.3];
        let p_tilde = m.apply(&truth);
        let inv = mitigate_inversion(&m, &p_tilde).unwrap();
        let lsq = mitigate_lsq(&m, &p_tilde, 1e-12, 100_000).unwrap();
        for (a, b) in inv.corrected.iter().zip(&lsq.corrected) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        for (got, want) in lsq.corrected.iter().zip(&truth) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-8);
        }
    }

    #[test]
    fn lsq_round_trip_on_seeded_random_simplex_points() {
        let m = build_response_matrix(&[
            pair_from(0.53, 0.42),
            pair_from(0.505, 0.465),
            pair_from(0.49, 0.44),
        ])
        .unwrap();
        // Walk a deterministic sequence of simplex points.
        let mut state = 0xabcdef12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10 {
            let raw: Vec<f64> = (0..8).map(|_| next() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / sum).collect();
            let observed = m.apply(&p);
            let r = mitigate_lsq(&m, &observed, 1e-12, 100_000).unwrap();
            assert!(r.converged);
            for (got, want) in r.corrected.iter().zip(&p) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn lsq_survives_an_ill_conditioned_crosstalk_matrix() {
        // A whitened random POVM gives a far harsher response matrix than
        // any realistic readout; the solver should still drive the fit
        // close even if the per-component recovery is looser.
        let m = build_response_matrix_crosstalk(&random_povm(3, 41)).unwrap();
        assert!(m.condition_number() > 50.0, "fixture lost its teeth");
        let p = [0.3, 0.05, 0.1, 0.15, 0.05, 0.05, 0.2, 0.1];
        let observed = m.apply(&p);
        let r = mitigate_lsq(&m, &observed, 1e-12, 200_000).unwrap();
        assert!(r.residual < 1e-9, "residual {}", r.residual);
        for (got, want) in r.corrected.iter().zip(&p) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn twirl_plan_layout() {
        let plan = twirl_plan(2);
        assert_eq!(plan.placements, vec!["00", "01", "10", "11"]);
    }

    #[test]
    fn average_twirled_validates_count() {
        assert!(matches!(
            average_twirled(&vec![vec![0.5, 0.5]; 3]),
            Err(QdtError::WrongTwirlCount { .. })
        ));
        let mean = average_twirled(&[vec![0.4, 0.6], vec![0.6, 0.4]]).unwrap();
        assert_abs_diff_eq!(mean[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn twirl_average_cancels_x_component_single_qubit() {
        // Detector with a1 = 0.05 measured on |+>: the two twirl circuits
        // disagree, but their mean equals the a1-free prediction M * diag(rho).
        let a = AVector::new(0.5, 0.05, 0.0, 0.45);
        let p = DetectorPovm::from_avector(a);
        let plus = TestState::from_label_str("+").unwrap();
        let mut dists = Vec::new();
        for placement in &twirl_plan(1).placements {
            let rho = conjugate_by_z(plus.density(), placement).unwrap();
            dists.push(born_probabilities(&p, &rho).unwrap());
        }
        assert!((dists[0][0] - dists[1][0]).abs() > 0.01, "twirl had no effect");
        let mean = average_twirled(&dists).unwrap();
        let m = build_response_matrix(&[(a, a.complement())]).unwrap();
        let prediction = m.apply(&[0.5, 0.5]); // diag of |+><+|
        assert_abs_diff_eq!(mean[0], prediction[0], epsilon = 1e-12);
        assert_abs_diff_eq!(mean[1], prediction[1], epsilon = 1e-12);
    }

    #[test]
    fn twirl_average_cancels_tilts_two_qubits() {
        let a_tilted = AVector::new(0.5, 0.04, 0.03, 0.44);
        let a_plain = AVector::new(0.52, 0.0, 0.0, 0.46);
        let povm = DetectorPovm::product(&[
            DetectorPovm::from_avector(a_tilted),
            DetectorPovm::from_avector(a_plain),
        ])
        .unwrap();
        let state = TestState::from_label_str("+,+i").unwrap();
        let mut dists = Vec::new();
        for placement in &twirl_plan(2).placements {
            let rho = conjugate_by_z(state.density(), placement).unwrap();
            dists.push(born_probabilities(&povm, &rho).unwrap());
        }
        let mean = average_twirled(&dists).unwrap();
        let m = build_response_matrix(&[
            (a_tilted, a_tilted.complement()),
            (a_plain, a_plain.complement()),
        ])
        .unwrap();
        let diag = vec![0.25, 0.25, 0.25, 0.25]; // |+><+| (x) |+i><+i| diagonal
        let prediction = m.apply(&diag);
        for k in 0..4 {
            assert_abs_diff_eq!(mean[k], prediction[k], epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn simplex_projection_lands_on_simplex(v in proptest::collection::vec(-2.0f64..2.0, 1..12)) {
            let p = project_to_simplex(&v);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn simplex_projection_is_idempotent(v in proptest::collection::vec(-2.0f64..2.0, 1..12)) {
            let p = project_to_simplex(&v);
            let pp = project_to_simplex(&p);
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn simplex_projection_beats_other_simplex_points(
            v in proptest::collection::vec(-1.0f64..1.0, 4),
            w in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            // The projection must be at least as close to v as an arbitrary
            // simplex point.
            let p = project_to_simplex(&v);
            let sum: f64 = w.iter().sum();
            let q: Vec<f64> = w.iter().map(|x| x / sum).collect();
            let d = |a: &[f64]| -> f64 {
                a.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum()
            };
            prop_assert!(d(&p) <= d(&q) + 1e-12);
        }
    }
}
