use thiserror::Error;

/// Error type shared by every module of the toolkit.
#[derive(Debug, Error)]
pub enum QdtError {
    #[error("matrix dimension {0} is not a power of two")]
    DimNotPowerOfTwo(usize),

    #[error("expected {expected} matrix entries for dimension {dim}, got {found}")]
    EntryCountMismatch {
        dim: usize,
        expected: usize,
        found: usize,
    },

    #[error("matrix dimensions differ: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("matrix dimension {dim} does not match {num_qubits} qubits")]
    QubitDimMismatch { dim: usize, num_qubits: usize },

    #[error("operator is not Hermitian: offending magnitude {magnitude:.3e}")]
    NotHermitian { magnitude: f64 },

    #[error("eigensolver did not converge within the rotation cap: off-diagonal residual {residual:.3e}")]
    EigNonConvergence { residual: f64 },

    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("expected {expected} Pauli coefficients for {num_qubits} qubits, got {found}")]
    CoeffLengthMismatch {
        num_qubits: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid partial trace: {0}")]
    InvalidTrace(String),

    #[error("invalid outcome bitstring {0:?}")]
    BadBitstring(String),

    #[error("POVM must have {expected} elements, got {found}")]
    WrongElementCount { expected: usize, found: usize },

    #[error("POVM is missing outcome {0:?}")]
    MissingOutcome(String),

    #[error("keeping every qubit is the identity reduction; use the detector unchanged")]
    ReduceKeepAll,

    #[error("invalid qubit subset: {0}")]
    BadQubitSubset(String),

    #[error("operation requires a single-qubit detector, got {0} qubits")]
    NotSingleQubit(usize),

    #[error("operation requires a two-qubit detector, got {0} qubits")]
    NotTwoQubit(usize),

    #[error("unknown state label token {0:?}")]
    BadStateLabel(String),

    #[error("{requested} qubits exceeds the test-state cap of {cap}; use the uncapped constructor if intended")]
    StateSetTooLarge { requested: usize, cap: usize },

    #[error("POVM failed validity check: completeness residual {completeness_residual:.3e}, min eigenvalue {min_eigenvalue:.3e}")]
    InvalidPovm {
        completeness_residual: f64,
        min_eigenvalue: f64,
    },

    #[error("noisy-detector spec rejected for qubit {qubit}: tilt magnitude {tilt:.4} exceeds the PSD limit {max_tilt:.4}")]
    TiltTooLarge {
        qubit: usize,
        tilt: f64,
        max_tilt: f64,
    },

    #[error("readout probability for qubit {qubit} outside [0, 1]: {value}")]
    BadReadoutProbability { qubit: usize, value: f64 },

    #[error("negative Born probability {value:.3e} for outcome {outcome:?}")]
    NegativeProbability { value: f64, outcome: String },

    #[error("Born probabilities sum to {sum} (deviation above tolerance); POVM/state pair invalid")]
    ProbabilitySumOff { sum: f64 },

    #[error("state is not a density matrix: {0}")]
    BadDensityMatrix(String),

    #[error("counts dataset malformed: {0}")]
    BadDataset(String),

    #[error("state {state:?} has zero total shots; frequencies undefined")]
    ZeroShots { state: String },

    #[error("bootstrap requires at least 2 runs, got {0}")]
    TooFewRuns(usize),

    #[error("bootstrap discarded {failed}/{total} non-converged resamples (more than 10%)")]
    BootstrapTooManyFailures { failed: usize, total: usize },

    #[error("a-vector pair violates completeness: residual {residual:.3e}")]
    CompletenessViolation { residual: f64 },

    #[error("response matrix too ill-conditioned to invert: condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    #[error("not a probability vector: {0}")]
    BadDistribution(String),

    #[error("expected {expected} twirled distributions, got {found}")]
    WrongTwirlCount { expected: usize, found: usize },

    #[error("comparison inputs have mismatched qubit keys: {0}")]
    KeyMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported schema {found:?}, expected {expected:?}")]
    SchemaMismatch { expected: String, found: String },
}

pub type Result<T> = std::result::Result<T, QdtError>;
