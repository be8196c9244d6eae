//! The Pauli-eigenstate test ensemble driving detector tomography.
//!
//! Tomography needs probe states whose Pauli coefficients span the full
//! operator space.  The six eigenstates of sigma_x/y/z do that for one qubit,
//! and their N-fold tensor products do it for N qubits.  Each state carries
//! the gate sequence (over {X, H, S}) that prepares it from |0>, so the same
//! descriptions can drive a simulator here or a circuit compiler elsewhere.

use crate::error::{QdtError, Result};
use crate::tensor::{pauli_expand, singular_values, Complex64, ComplexMatrix};

/// Labels of the six single-qubit test states, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateLabel {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

/// Canonical ordering of the single-qubit labels; product-state enumeration
/// cycles qubit 0 slowest.
pub const LABEL_ORDER: [StateLabel; 6] = [
    StateLabel::Zero,
    StateLabel::One,
    StateLabel::Plus,
    StateLabel::Minus,
    StateLabel::PlusI,
    StateLabel::MinusI,
];

impl StateLabel {
    pub fn token(self) -> &'static str {
        match self {
            StateLabel::Zero => "0",
            StateLabel::One => "1",
            StateLabel::Plus => "+",
            StateLabel::Minus => "-",
            StateLabel::PlusI => "+i",
            StateLabel::MinusI => "-i",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        LABEL_ORDER
            .iter()
            .copied()
            .find(|l| l.token() == token)
            .ok_or_else(|| QdtError::BadStateLabel(token.to_string()))
    }
}

/// Preparation gates; matrices are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    X,
    H,
    S,
}

impl Gate {
    pub fn matrix(self) -> ComplexMatrix {
        let c = Complex64::new;
        let entries = match self {
            Gate::X => vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            Gate::H => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]
            }
            Gate::S => vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)],
        };
        ComplexMatrix::new(2, entries).unwrap()
    }
}

/// Shortest preparation of each labeled state from |0>, written in
/// application order (leftmost gate acts first).
pub fn prep_sequence(label: StateLabel) -> Vec<Gate> {
    match label {
        StateLabel::Zero => vec![],
        StateLabel::One => vec![Gate::X],
        StateLabel::Plus => vec![Gate::H],
        StateLabel::Minus => vec![Gate::X, Gate::H],
        StateLabel::PlusI => vec![Gate::H, Gate::S],
        StateLabel::MinusI => vec![Gate::X, Gate::H, Gate::S],
    }
}

/// A product test state: per-qubit labels, exact density matrix, and the
/// per-qubit gate sequences that prepare it.
#[derive(Clone, Debug)]
pub struct TestState {
    num_qubits: usize,
    labels: Vec<StateLabel>,
    density: ComplexMatrix,
    prep: Vec<Vec<Gate>>,
}

impl TestState {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    /// Comma-joined token string, e.g. `"0,+i"`; this is the form used in
    /// counts files.
    pub fn label(&self) -> String {
        self.labels
            .iter()
            .map(|l| l.token())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn density(&self) -> &ComplexMatrix {
        &self.density
    }

    pub fn prep(&self) -> &[Vec<Gate>] {
        &self.prep
    }

    /// Builds the product state for an explicit label combination.
    pub fn from_labels(labels: &[StateLabel]) -> Self {
        assert!(!labels.is_empty(), "a state needs at least one qubit");
        let mut density = single_qubit_density(labels[0]);
        for &l in &labels[1..] {
            density = density.kron(&single_qubit_density(l));
        }
        TestState {
            num_qubits: labels.len(),
            labels: labels.to_vec(),
            density,
            prep: labels.iter().map(|&l| prep_sequence(l)).collect(),
        }
    }

    /// Parses a comma-joined token string back into a state.
    pub fn from_label_str(label: &str) -> Result<Self> {
        let labels = label
            .split(',')
            .map(StateLabel::from_token)
            .collect::<Result<Vec<_>>>()?;
        if labels.is_empty() {
            return Err(QdtError::BadStateLabel(label.to_string()));
        }
        Ok(Self::from_labels(&labels))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Single-qubit eigenstate (1 ± sigma_axis)/2 of the chosen Pauli operator.
pub fn pauli_eigenstate(axis: Axis, sign: Sign) -> TestState {
    let label = match (axis, sign) {
        (Axis::Z, Sign::Plus) => StateLabel::Zero,
        (Axis::Z, Sign::Minus) => StateLabel::One,
        (Axis::X, Sign::Plus) => StateLabel::Plus,
        (Axis::X, Sign::Minus) => StateLabel::Minus,
        (Axis::Y, Sign::Plus) => StateLabel::PlusI,
        (Axis::Y, Sign::Minus) => StateLabel::MinusI,
    };
    TestState::from_labels(&[label])
}

fn single_qubit_density(label: StateLabel) -> ComplexMatrix {
    let c = Complex64::new;
    let entries = match label {
        StateLabel::Zero => vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        StateLabel::One => vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        StateLabel::Plus => vec![c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)],
        StateLabel::Minus => vec![c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)],
        StateLabel::PlusI => vec![c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)],
        StateLabel::MinusI => vec![c(0.5, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(0.5, 0.0)],
    };
    ComplexMatrix::new(2, entries).unwrap()
}

/// Number of qubits beyond which [`test_state_set`] refuses to enumerate;
/// 6^4 = 1296 circuits is already past what the covered experiments need.
pub const STATE_SET_CAP: usize = 3;

/// The canonical ordered set of 6^N product test states.
///
/// Errors above [`STATE_SET_CAP`] qubits; call
/// [`test_state_set_uncapped`] to enumerate large sets deliberately.
pub fn test_state_set(num_qubits: usize) -> Result<Vec<TestState>> {
    if num_qubits > STATE_SET_CAP {
        return Err(QdtError::StateSetTooLarge {
            requested: num_qubits,
            cap: STATE_SET_CAP,
        });
    }
    Ok(test_state_set_uncapped(num_qubits))
}

/// Uncapped variant of [`test_state_set`]; the caller owns the 6^N blow-up.
pub fn test_state_set_uncapped(num_qubits: usize) -> Vec<TestState> {
    assert!(num_qubits >= 1, "a state needs at least one qubit");
    let total = 6usize.pow(num_qubits as u32);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut labels = Vec::with_capacity(num_qubits);
        for q in 0..num_qubits {
            let idx = (k / 6usize.pow((num_qubits - 1 - q) as u32)) % 6;
            labels.push(LABEL_ORDER[idx]);
        }
        out.push(TestState::from_labels(&labels));
    }
    out
}

/// Density matrix of the N-qubit GHZ state `(|0...0> + |1...1>)/sqrt(2)`
/// (the Bell state for N = 2).  Used as the entangled probe in mitigation
/// demonstrations.
pub fn ghz_density(num_qubits: usize) -> ComplexMatrix {
    assert!(num_qubits >= 1);
    let dim = 1usize << num_qubits;
    let mut rho = ComplexMatrix::zeros(dim);
    let half = Complex64::new(0.5, 0.0);
    rho.set(0, 0, half);
    rho.set(0, dim - 1, half);
    rho.set(dim - 1, 0, half);
    rho.set(dim - 1, dim - 1, half);
    rho
}

/// Outcome of spanning-set analysis over a list of test states.
#[derive(Clone, Copy, Debug)]
pub struct CompletenessReport {
    /// True when the states' Pauli coefficient vectors span the full
    /// 4^N-dimensional space, i.e. tomography has no blind directions.
    pub complete: bool,
    /// Ratio of largest to smallest singular value of the stacked coefficient
    /// matrix; infinite when the set is rank-deficient.
    pub condition_number: f64,
}

/// Checks whether a state list is informationally complete for detector
/// tomography.
pub fn informational_completeness_check(states: &[TestState]) -> CompletenessReport {
    assert!(!states.is_empty(), "empty state list");
    let n = states[0].num_qubits();
    let cols = 4usize.pow(n as u32);
    let rows = states.len();
    let mut data = Vec::with_capacity(rows * cols);
    for s in states {
        let t = pauli_expand(s.density(), n).expect("densities are Hermitian");
        data.extend_from_slice(t.coeffs());
    }
    if rows < cols {
        return CompletenessReport {
            complete: false,
            condition_number: f64::INFINITY,
        };
    }
    let sv = singular_values(rows, cols, &data);
    let largest = sv[0];
    let smallest = sv[cols - 1];
    if smallest <= 1e-10 * largest {
        CompletenessReport {
            complete: false,
            condition_number: f64::INFINITY,
        }
    } else {
        CompletenessReport {
            complete: true,
            condition_number: largest / smallest,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::frobenius_distance;
    use approx::assert_abs_diff_eq;

    /// Applies a gate list to |0> and returns the resulting pure-state
    /// density, as an independent check on the tabulated densities.
    fn density_from_prep(gates: &[Gate]) -> ComplexMatrix {
        let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for g in gates {
            let m = g.matrix();
            let next = [
                m.get(0, 0) * psi[0] + m.get(0, 1) * psi[1],
                m.get(1, 0) * psi[0] + m.get(1, 1) * psi[1],
            ];
            psi = next;
        }
        let mut rho = ComplexMatrix::zeros(2);
        for r in 0..2 {
            for c in 0..2 {
                rho.set(r, c, psi[r] * psi[c].conj());
            }
        }
        rho
    }

    #[test]
    fn zero_state_is_ground_projector() {
        let s = pauli_eigenstate(Axis::Z, Sign::Plus);
        assert_eq!(s.label(), "0");
        assert!(s.prep()[0].is_empty());
        assert_abs_diff_eq!(s.density().get(0, 0).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn every_prep_sequence_reproduces_its_density() {
        for &label in &LABEL_ORDER {
            let s = TestState::from_labels(&[label]);
            let prepared = density_from_prep(&s.prep()[0]);
            assert!(
                frobenius_distance(&prepared, s.density()).unwrap() < 1e-12,
                "prep mismatch for {}",
                label.token()
            );
        }
    }

    #[test]
    fn minus_state_prep_is_h_after_x() {
        let s = TestState::from_labels(&[StateLabel::Minus]);
        assert_eq!(s.prep()[0], vec![Gate::X, Gate::H]);
        // H X |0> = H |1> = |->
        let rho = density_from_prep(&[Gate::X, Gate::H]);
        assert_abs_diff_eq!(rho.get(0, 1).re, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn plus_i_state_prep_is_s_after_h() {
        let s = TestState::from_labels(&[StateLabel::PlusI]);
        assert_eq!(s.prep()[0], vec![Gate::H, Gate::S]);
        // S H |0> = (|0> + i|1>)/sqrt(2); off-diagonal of rho is -i/2.
        let rho = density_from_prep(&[Gate::H, Gate::S]);
        assert_abs_diff_eq!(rho.get(0, 1).im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn set_sizes_and_label_uniqueness() {
        for n in 1..=3 {
            let set = test_state_set(n).unwrap();
            assert_eq!(set.len(), 6usize.pow(n as u32));
            let mut labels: Vec<String> = set.iter().map(|s| s.label()).collect();
            labels.sort();
            labels.dedup();
            assert_eq!(labels.len(), set.len(), "duplicate labels at N={n}");
        }
        assert!(matches!(
            test_state_set(4),
            Err(QdtError::StateSetTooLarge { .. })
        ));
        assert_eq!(test_state_set_uncapped(4).len(), 1296);
    }

    #[test]
    fn canonical_order_cycles_last_qubit_fastest() {
        let set = test_state_set(2).unwrap();
        assert_eq!(set[0].label(), "0,0");
        assert_eq!(set[1].label(), "0,1");
        assert_eq!(set[5].label(), "0,-i");
        assert_eq!(set[6].label(), "1,0");
        assert_eq!(set[35].label(), "-i,-i");
    }

    #[test]
    fn densities_are_pure_product_states() {
        for s in test_state_set(2).unwrap() {
            let rho = s.density();
            assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-14);
            assert!(rho.hermiticity_defect() < 1e-15);
            // Purity Tr(rho^2) = 1 for pure states.
            let sq = rho.matmul(rho).unwrap();
            assert_abs_diff_eq!(sq.trace().re, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn single_qubit_set_sums_to_three_identity() {
        let mut sum = ComplexMatrix::zeros(2);
        for s in test_state_set(1).unwrap() {
            sum = sum.add(s.density()).unwrap();
        }
        let target = ComplexMatrix::identity(2).scale(3.0);
        assert!(frobenius_distance(&sum, &target).unwrap() < 1e-14);
    }

    #[test]
    fn completeness_of_canonical_sets() {
        for n in 1..=2 {
            let r = informational_completeness_check(&test_state_set(n).unwrap());
            assert!(r.complete, "set N={n} must be complete");
            assert!(r.condition_number.is_finite());
        }
    }

    #[test]
    fn z_pair_alone_is_incomplete() {
        let states = vec![
            TestState::from_labels(&[StateLabel::Zero]),
            TestState::from_labels(&[StateLabel::One]),
        ];
        let r = informational_completeness_check(&states);
        assert!(!r.complete);
        assert!(r.condition_number.is_infinite());
    }

    #[test]
    fn label_round_trip() {
        let s = TestState::from_label_str("+i,-,1").unwrap();
        assert_eq!(s.label(), "+i,-,1");
        assert_eq!(s.num_qubits(), 3);
        assert!(TestState::from_label_str("bogus").is_err());
    }
}
