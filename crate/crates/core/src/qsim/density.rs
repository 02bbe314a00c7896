use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::{check_distinct, gather, QsimError, Result, StateVector, EIGEN_CUTOFF};

/// Widest subsystem [`ReducedDensity`] will materialize as a dense matrix.
pub const MAX_REDUCED_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entropies {
    /// `-sum lambda lg lambda` over eigenvalues, in bits.
    pub von_neumann: f64,
    /// `-sum p lg p` over the diagonal, in bits.
    pub shannon: f64,
}

/// Reduced density operator of a qubit subset, indexed by the big-endian
/// value of `qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    qubits: Vec<usize>,
    matrix: DMatrix<Complex64>,
    populations: Vec<f64>,
}

impl ReducedDensity {
    pub(crate) fn from_state(state: &StateVector, qubits: &[usize]) -> Result<Self> {
        if qubits.is_empty() {
            return Err(QsimError::EmptySubset);
        }
        let n = state.num_qubits();
        check_distinct(qubits, n)?;
        if qubits.len() > MAX_REDUCED_QUBITS {
            return Err(QsimError::ReducedTooLarge(qubits.len()));
        }
        let rest = state.layout().complement(qubits);
        let (da, de) = (1usize << qubits.len(), 1usize << rest.len());

        // psi as a da x de matrix; rho = M M^dagger
        let mut m = DMatrix::<Complex64>::zeros(da, de);
        for (i, a) in state.amplitudes().iter().enumerate() {
            m[(gather(i, qubits, n), gather(i, &rest, n))] = *a;
        }
        let matrix = &m * m.adjoint();
        Ok(Self::from_matrix_unchecked(qubits.to_vec(), matrix))
    }

    /// Wraps an explicit density matrix, checking Hermiticity, unit trace,
    /// and positivity.
    pub fn from_matrix(qubits: Vec<usize>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = 1usize << qubits.len();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QsimError::LengthMismatch { found: matrix.nrows(), expected: d });
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let trace = matrix.trace();
        if herm > super::NORM_TOLERANCE || (trace.re - 1.0).abs() > super::NORM_TOLERANCE || trace.im.abs() > super::NORM_TOLERANCE {
            return Err(QsimError::NotNormalized(trace.re));
        }
        let rd = Self::from_matrix_unchecked(qubits, matrix);
        if rd.eigenvalues().iter().any(|&l| l < -super::NORM_TOLERANCE) {
            return Err(QsimError::NotNormalized(trace.re));
        }
        Ok(rd)
    }

    fn from_matrix_unchecked(qubits: Vec<usize>, matrix: DMatrix<Complex64>) -> Self {
        let populations = (0..matrix.nrows()).map(|i| matrix[(i, i)].re).collect();
        Self { qubits, matrix, populations }
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Diagonal in the computational basis.
    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Eigenvalues of the Hermitian matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn entropies(&self) -> Entropies {
        Entropies {
            von_neumann: shannon_bits(&self.eigenvalues()),
            shannon: shannon_bits(&self.populations),
        }
    }

    /// Marginal onto the listed positions of `self.qubits()`.
    pub fn marginalize(&self, keep: &[usize]) -> Result<ReducedDensity> {
        let w = self.qubits.len();
        check_distinct(keep, w)?;
        let rest: Vec<usize> = (0..w).filter(|p| !keep.contains(p)).collect();
        let (dk, dr) = (1usize << keep.len(), 1usize << rest.len());
        let mut out = DMatrix::<Complex64>::zeros(dk, dk);
        for i in 0..dk {
            for j in 0..dk {
                let mut acc = Complex64::new(0.0, 0.0);
                for e in 0..dr {
                    let a = super::scatter(super::scatter(0, keep, w, i), &rest, w, e);
                    let b = super::scatter(super::scatter(0, keep, w, j), &rest, w, e);
                    acc += self.matrix[(a, b)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(Self::from_matrix_unchecked(keep.iter().map(|&p| self.qubits[p]).collect(), out))
    }
}

/// `-sum p lg p` in bits, with entries below [`EIGEN_CUTOFF`] contributing 0.
pub fn shannon_bits(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > EIGEN_CUTOFF).map(|&x| -x * x.log2()).sum();
    h.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{prepare, RegisterLayout, RegisterPrep};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> StateVector {
        let l = RegisterLayout::new(&[("X", 1), ("Y", 1)]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(l, vec![c(0.0), c(s), c(s), c(0.0)]).unwrap()
    }

    #[test]
    fn bell_first_qubit_is_half_half() {
        let rd = bell().reduce(&[0]).unwrap();
        assert!((rd.populations()[0] - 0.5).abs() < 1e-15);
        assert!((rd.populations()[1] - 0.5).abs() < 1e-15);
        let e = rd.entropies();
        assert!((e.von_neumann - 1.0).abs() < 1e-12);
        assert!((e.shannon - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_basis_state_reduces_to_pure() {
        let l = RegisterLayout::new(&[("A", 2), ("B", 2)]).unwrap();
        let s = prepare(&l, &[("A", RegisterPrep::Basis(2)), ("B", RegisterPrep::Basis(1))]).unwrap();
        let rd = s.reduce_registers(&["A"]).unwrap();
        assert_eq!(rd.populations(), &[0.0, 0.0, 1.0, 0.0]);
        let e = rd.entropies();
        assert_eq!((e.von_neumann, e.shannon), (0.0, 0.0));
    }

    #[test]
    fn maximally_mixed_two_qubits() {
        let mut m = DMatrix::<Complex64>::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = c(0.25);
        }
        let rd = ReducedDensity::from_matrix(vec![0, 1], m).unwrap();
        let e = rd.entropies();
        assert!((e.von_neumann - 2.0).abs() < 1e-12);
        assert!((e.shannon - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_plus_state() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.5), c(0.5), c(0.5)]);
        let e = ReducedDensity::from_matrix(vec![0], m).unwrap().entropies();
        assert!(e.von_neumann.abs() < 1e-12);
        assert!((e.shannon - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.6)]);
        assert!(ReducedDensity::from_matrix(vec![0], m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.9), c(0.9), c(0.5)]);
        assert!(ReducedDensity::from_matrix(vec![0], m).is_err());
    }

    #[test]
    fn reduction_errors() {
        let s = bell();
        assert_eq!(s.reduce(&[]), Err(QsimError::EmptySubset));
        assert!(s.reduce(&[0, 0]).is_err());
        let l = RegisterLayout::new(&[("A", 11), ("B", 1)]).unwrap();
        let big = prepare(&l, &[]).unwrap();
        assert_eq!(big.reduce_registers(&["A"]), Err(QsimError::ReducedTooLarge(11)));
        // the complement side keeps this computable
        assert_eq!(big.entanglement_entropy(&l.qubits_of(&["A"]).unwrap()).unwrap(), 0.0);
    }
}
