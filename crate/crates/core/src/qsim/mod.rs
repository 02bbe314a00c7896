//! Dense statevector simulation over named qubit registers.
//!
//! Basis indices are big-endian: qubit position 0 is the most significant bit
//! and registers are concatenated in layout order. Register values read the
//! same way, so `|01>_K |10>_X` in a `K(2) X(2)` layout is index `0b0110`.
//!
//! Besides gate application the module provides partial traces, entropies,
//! projective computational-basis measurement, and the backward (backdated)
//! evolution obtained by projecting the evolved state and running the same
//! gates in reverse.

mod density;
mod evolution;
mod gate;
mod layout;
mod state;

pub use density::{Entropies, ReducedDensity, MAX_REDUCED_QUBITS};
pub use evolution::{
    backward_preparation, joint_distribution_measured_first, joint_distribution_measured_last,
    trajectory_populations, PopulationTrajectory, TrajectoryStep,
};
pub use gate::{Gate, GateSequence};
pub use layout::{Register, RegisterLayout, MAX_QUBITS};
pub use state::{prepare, Measurement, Projector, RegisterPrep, StateVector};

use thiserror::Error;

/// Norm and trace tolerance.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Eigenvalues and populations below this are treated as zero in entropies.
pub const EIGEN_CUTOFF: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("{0} qubits requested, dense simulation is capped at {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("duplicate register `{0}`")]
    DuplicateRegister(String),
    #[error("register `{0}` has zero width")]
    EmptyRegister(String),
    #[error("qubit {qubit} out of range for {qubits}-qubit layout")]
    QubitOutOfRange { qubit: usize, qubits: usize },
    #[error("qubit {0} used twice in one operation")]
    DuplicateQubit(usize),
    #[error("register width mismatch: {0}")]
    WidthMismatch(String),
    #[error("basis value {value} does not fit in {width} qubits")]
    InvalidBasisValue { value: u64, width: usize },
    #[error("state has squared norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("amplitude vector has length {found}, layout needs {expected}")]
    LengthMismatch { found: usize, expected: usize },
    #[error("measurement outcome has zero probability")]
    ZeroProbability,
    #[error("reduced state on {0} qubits exceeds the {MAX_REDUCED_QUBITS}-qubit density cap")]
    ReducedTooLarge(usize),
    #[error("empty qubit subset")]
    EmptySubset,
    #[error("gate `{0}` targets a qubit that is measured first")]
    TargetsMeasured(String),
}

pub type Result<T> = std::result::Result<T, QsimError>;

pub(crate) fn check_distinct(qubits: &[usize], n: usize) -> Result<()> {
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n {
            return Err(QsimError::QubitOutOfRange { qubit: q, qubits: n });
        }
        if qubits[..i].contains(&q) {
            return Err(QsimError::DuplicateQubit(q));
        }
    }
    Ok(())
}

/// Bit mask of qubit position `q` in an `n`-qubit index.
#[inline]
pub(crate) fn mask(q: usize, n: usize) -> usize {
    1usize << (n - 1 - q)
}

/// Value of `qubits` (big-endian) inside basis index `index`.
#[inline]
pub(crate) fn gather(index: usize, qubits: &[usize], n: usize) -> usize {
    qubits.iter().fold(0, |acc, &q| (acc << 1) | ((index & mask(q, n) != 0) as usize))
}

/// Writes `value` (big-endian) into the `qubits` of `index`.
#[inline]
pub(crate) fn scatter(mut index: usize, qubits: &[usize], n: usize, value: usize) -> usize {
    let w = qubits.len();
    for (i, &q) in qubits.iter().enumerate() {
        let bit = (value >> (w - 1 - i)) & 1;
        index = (index & !mask(q, n)) | (bit * mask(q, n));
    }
    index
}
