use num_complex::Complex64;
use rand::Rng;

use super::density::ReducedDensity;
use super::{check_distinct, gather, GateSequence, QsimError, RegisterLayout, Result, NORM_TOLERANCE};

/// Per-register preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegisterPrep {
    /// Computational basis value, big-endian over the register.
    Basis(u64),
    /// Even superposition of all values, `|+>` on every qubit.
    Uniform,
    /// `(|0> - |1>)/sqrt(2)` on every qubit.
    Minus,
}

/// Computational-basis projector `|value><value|` on `qubits`. An empty
/// qubit list is the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projector {
    pub qubits: Vec<usize>,
    pub value: u64,
}

impl Projector {
    pub fn new(qubits: Vec<usize>, value: u64) -> Self {
        Self { qubits, value }
    }

    pub fn identity() -> Self {
        Self { qubits: Vec::new(), value: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.qubits.is_empty()
    }

    /// Outcome as a bit string over `qubits`.
    pub fn label(&self) -> String {
        bit_string(self.value, self.qubits.len())
    }
}

pub(crate) fn bit_string(value: u64, width: usize) -> String {
    (0..width).map(|i| if (value >> (width - 1 - i)) & 1 == 1 { '1' } else { '0' }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wraps amplitudes, which must have unit norm within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(QsimError::LengthMismatch { found: amps.len(), expected: layout.dim() });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(Self { layout, amps })
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        let mut amps = vec![Complex64::new(0.0, 0.0); layout.dim()];
        if index >= amps.len() {
            return Err(QsimError::InvalidBasisValue { value: index as u64, width: layout.num_qubits() });
        }
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { layout, amps })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.num_qubits()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply(&self, gates: &GateSequence) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_mut(gates)?;
        Ok(out)
    }

    pub fn apply_mut(&mut self, gates: &GateSequence) -> Result<()> {
        let n = self.num_qubits();
        gates.validate_for(n)?;
        for g in gates.gates() {
            g.apply_in_place(&mut self.amps, n);
        }
        Ok(())
    }

    pub(crate) fn apply_gate_mut(&mut self, gate: &super::Gate) {
        let n = self.num_qubits();
        gate.apply_in_place(&mut self.amps, n);
    }

    /// Exact Born distribution over the big-endian values of `qubits`.
    pub fn marginal_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        let n = self.num_qubits();
        check_distinct(qubits, n)?;
        let mut probs = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            probs[gather(i, qubits, n)] += a.norm_sqr();
        }
        Ok(probs)
    }

    /// Unnormalized `P |psi>`.
    pub fn project(&self, projector: &Projector) -> Result<Vec<Complex64>> {
        let n = self.num_qubits();
        check_distinct(&projector.qubits, n)?;
        if projector.value >> projector.qubits.len() != 0 {
            return Err(QsimError::InvalidBasisValue { value: projector.value, width: projector.qubits.len() });
        }
        let v = projector.value as usize;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if gather(i, &projector.qubits, n) == v { *a } else { Complex64::new(0.0, 0.0) })
            .collect())
    }

    /// `P |psi> / |P |psi>|`.
    pub fn project_normalized(&self, projector: &Projector) -> Result<StateVector> {
        let mut amps = self.project(projector)?;
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p <= 1e-24 {
            return Err(QsimError::ZeroProbability);
        }
        let scale = 1.0 / p.sqrt();
        for a in &mut amps {
            *a *= scale;
        }
        Ok(StateVector { layout: self.layout.clone(), amps })
    }

    /// Projective measurement of `qubits` in the computational basis.
    pub fn measure<R: Rng + ?Sized>(&self, qubits: &[usize], rng: &mut R) -> Result<Measurement> {
        if qubits.is_empty() {
            return Err(QsimError::EmptySubset);
        }
        let distribution = self.marginal_probabilities(qubits)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = None;
        for (v, &p) in distribution.iter().enumerate() {
            acc += p;
            if p > 0.0 && u < acc {
                outcome = Some(v);
                break;
            }
        }
        // rounding can leave u just above the final cumulative sum
        let outcome = outcome
            .or_else(|| distribution.iter().rposition(|&p| p > 0.0))
            .ok_or(QsimError::ZeroProbability)?;
        let post_state = self.project_normalized(&Projector::new(qubits.to_vec(), outcome as u64))?;
        Ok(Measurement { qubits: qubits.to_vec(), outcome: outcome as u64, post_state, distribution })
    }

    /// Reduced density operator on `qubits` (partial trace over the rest).
    pub fn reduce(&self, qubits: &[usize]) -> Result<ReducedDensity> {
        ReducedDensity::from_state(self, qubits)
    }

    pub fn reduce_registers(&self, names: &[&str]) -> Result<ReducedDensity> {
        let qubits = self.layout.qubits_of(names)?;
        self.reduce(&qubits)
    }

    /// Von Neumann entropy (bits) of the reduction to `qubits`, computed on
    /// the smaller side of the bipartition.
    pub fn entanglement_entropy(&self, qubits: &[usize]) -> Result<f64> {
        check_distinct(qubits, self.num_qubits())?;
        let rest = self.layout.complement(qubits);
        if rest.is_empty() || qubits.is_empty() {
            return Ok(0.0);
        }
        let side = if qubits.len() <= rest.len() { qubits.to_vec() } else { rest };
        Ok(self.reduce(&side)?.entropies().von_neumann)
    }

    /// `max_i |a_i e^{i phi} - b_i|` for the best global phase `phi`.
    pub fn max_deviation_up_to_phase(&self, other: &StateVector) -> f64 {
        max_deviation_up_to_phase(&self.amps, &other.amps)
    }

    /// `max_i |a_i - b_i|`.
    pub fn max_deviation(&self, other: &StateVector) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn max_deviation_up_to_phase(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 1e-300 { overlap / overlap.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter().zip(b).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub qubits: Vec<usize>,
    pub outcome: u64,
    pub post_state: StateVector,
    /// Exact outcome probabilities, indexed by big-endian value.
    pub distribution: Vec<f64>,
}

impl Measurement {
    pub fn outcome_bits(&self) -> String {
        bit_string(self.outcome, self.qubits.len())
    }
}

/// Product state with one preparation per register. Registers not listed
/// start in `|0...0>`.
pub fn prepare(layout: &RegisterLayout, spec: &[(&str, RegisterPrep)]) -> Result<StateVector> {
    let n = layout.num_qubits();
    let mut per_register: Vec<RegisterPrep> = vec![RegisterPrep::Basis(0); layout.registers().len()];
    for &(name, prep) in spec {
        let idx = layout
            .registers()
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| QsimError::UnknownRegister(name.to_string()))?;
        if let RegisterPrep::Basis(v) = prep {
            let width = layout.registers()[idx].width;
            if v >> width != 0 {
                return Err(QsimError::InvalidBasisValue { value: v, width });
            }
        }
        per_register[idx] = prep;
    }

    // amplitude of a basis index is the product of per-register factors
    let mut amps = vec![Complex64::new(1.0, 0.0); layout.dim()];
    for (reg, prep) in layout.registers().iter().zip(&per_register) {
        let qubits = reg.qubits();
        let size = (1usize << reg.width) as f64;
        for (i, a) in amps.iter_mut().enumerate() {
            let v = gather(i, &qubits, n);
            let factor = match *prep {
                RegisterPrep::Basis(b) => {
                    if v as u64 == b {
                        1.0
                    } else {
                        0.0
                    }
                }
                RegisterPrep::Uniform => 1.0 / size.sqrt(),
                RegisterPrep::Minus => {
                    let sign = if v.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                    sign / size.sqrt()
                }
            };
            *a *= factor;
        }
    }
    StateVector::from_amplitudes(layout.clone(), amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::Gate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn kxf(n: usize) -> RegisterLayout {
        RegisterLayout::new(&[("K", n), ("X", n), ("F", 1)]).unwrap()
    }

    fn bell() -> StateVector {
        let l = RegisterLayout::new(&[("X", 1), ("Y", 1)]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_amplitudes(l, vec![c(0.0), c(s), c(s), c(0.0)]).unwrap()
    }

    #[test]
    fn uniform_product_has_equal_moduli() {
        let l = kxf(2);
        let s = prepare(&l, &[("K", RegisterPrep::Uniform), ("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)])
            .unwrap();
        assert_eq!(s.amplitudes().len(), 32);
        for a in s.amplitudes() {
            assert!((a.norm() - 1.0 / 32f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn minus_and_basis_preparations() {
        let l = RegisterLayout::new(&[("F", 1)]).unwrap();
        let s = prepare(&l, &[("F", RegisterPrep::Minus)]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - c(h)).norm() < 1e-15);
        assert!((s.amplitudes()[1] - c(-h)).norm() < 1e-15);

        let l = RegisterLayout::new(&[("K", 2)]).unwrap();
        let s = prepare(&l, &[("K", RegisterPrep::Basis(0b10))]).unwrap();
        assert_eq!(s.amplitudes(), &[c(0.0), c(0.0), c(1.0), c(0.0)]);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(prepare(&l, &[("K", RegisterPrep::Basis(4))]).is_err());
        assert!(prepare(&l, &[("Q", RegisterPrep::Uniform)]).is_err());
    }

    #[test]
    fn h_twice_and_x() {
        let l = RegisterLayout::new(&[("A", 3)]).unwrap();
        let s = prepare(&l, &[("A", RegisterPrep::Basis(0b101))]).unwrap();
        let hh = GateSequence::new(vec![Gate::H(1), Gate::H(1)], &l).unwrap();
        assert!(s.apply(&hh).unwrap().max_deviation(&s) < 1e-12);
        let x = GateSequence::new(vec![Gate::X(1)], &l).unwrap();
        let flipped = s.apply(&x).unwrap();
        assert_eq!(flipped.amplitudes()[0b111], c(1.0));
    }

    #[test]
    fn from_amplitudes_checks() {
        let l = RegisterLayout::new(&[("A", 1)]).unwrap();
        assert!(matches!(
            StateVector::from_amplitudes(l.clone(), vec![c(1.0), c(1.0)]),
            Err(QsimError::NotNormalized(_))
        ));
        assert!(matches!(
            StateVector::from_amplitudes(l, vec![c(1.0)]),
            Err(QsimError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn delta_oracle_flips_on_equal_registers() {
        let l = kxf(2);
        let g = GateSequence::new(vec![Gate::oracle_delta(&l, "K", "X", "F").unwrap()], &l).unwrap();
        let s = prepare(&l, &[("K", RegisterPrep::Basis(1)), ("X", RegisterPrep::Basis(1))]).unwrap();
        assert_eq!(s.apply(&g).unwrap().amplitudes()[0b01011], c(1.0));
        let s = prepare(&l, &[("K", RegisterPrep::Basis(1)), ("X", RegisterPrep::Basis(2))]).unwrap();
        assert_eq!(s.apply(&g).unwrap(), s);
    }

    #[test]
    fn delta_oracle_kickback_matches_matrix_action() {
        // with F in |->, the oracle's matrix action is a -1 phase on k == x
        let l = kxf(2);
        let g = GateSequence::new(vec![Gate::oracle_delta(&l, "K", "X", "F").unwrap()], &l).unwrap();
        let s = prepare(&l, &[("K", RegisterPrep::Uniform), ("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)])
            .unwrap();
        let out = s.apply(&g).unwrap();
        for i in 0..32usize {
            let (k, x) = ((i >> 3) & 3, (i >> 1) & 3);
            // direct action: |k,x,b> -> |k,x,b ^ [k==x]>
            let src = if k == x { i ^ 1 } else { i };
            assert!((out.amplitudes()[i] - s.amplitudes()[src]).norm() < 1e-15);
            let sign = if k == x { -1.0 } else { 1.0 };
            assert!((out.amplitudes()[i] - s.amplitudes()[i] * sign).norm() < 1e-15);
        }
    }

    #[test]
    fn deutsch_oracle_encoding() {
        let l = RegisterLayout::new(&[("K", 2), ("X", 1), ("F", 1)]).unwrap();
        let g = GateSequence::new(vec![Gate::oracle_deutsch(&l, "K", "X", "F").unwrap()], &l).unwrap();
        let f_of = |k: u64, x: u64| {
            let s = prepare(&l, &[("K", RegisterPrep::Basis(k)), ("X", RegisterPrep::Basis(x))]).unwrap();
            let out = s.apply(&g).unwrap();
            let idx = ((k << 2) | (x << 1)) as usize;
            out.amplitudes()[idx | 1].norm() > 0.5
        };
        assert!(f_of(0b11, 0) && f_of(0b11, 1));
        assert!(!f_of(0b00, 0) && !f_of(0b00, 1));
        assert!(f_of(0b01, 1) && !f_of(0b01, 0));
        assert!(f_of(0b10, 0) && !f_of(0b10, 1));
    }

    #[test]
    fn diffusion_examples() {
        let l = kxf(2);
        let d = GateSequence::new(vec![Gate::diffusion(&l, "X").unwrap()], &l).unwrap();
        let s = prepare(&l, &[("X", RegisterPrep::Uniform), ("K", RegisterPrep::Basis(2))]).unwrap();
        assert!(s.apply(&d).unwrap().max_deviation(&s) < 1e-12);
        let b = prepare(&l, &[("X", RegisterPrep::Basis(3)), ("F", RegisterPrep::Minus)]).unwrap();
        let dd = GateSequence::new(vec![Gate::diffusion(&l, "X").unwrap(); 2], &l).unwrap();
        assert!(b.apply(&dd).unwrap().max_deviation(&b) < 1e-12);
    }

    #[test]
    fn one_grover_round_at_n4_is_exact() {
        // hand computation: O|s> = |s> - |k>, D(|s> - |k>) = |k> since <s|k> = 1/2
        let l = kxf(2);
        for k in 0..4u64 {
            let s = prepare(&l, &[("K", RegisterPrep::Basis(k)), ("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)])
                .unwrap();
            let g = GateSequence::new(
                vec![Gate::oracle_delta(&l, "K", "X", "F").unwrap(), Gate::diffusion(&l, "X").unwrap()],
                &l,
            )
            .unwrap();
            let out = s.apply(&g).unwrap();
            let want = prepare(&l, &[("K", RegisterPrep::Basis(k)), ("X", RegisterPrep::Basis(k)), ("F", RegisterPrep::Minus)])
                .unwrap();
            assert!(out.max_deviation(&want) < 1e-12);
        }
    }

    #[test]
    fn bell_measurement() {
        let s = bell();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let m = s.measure(&[0], &mut rng).unwrap();
        assert_eq!(m.distribution.len(), 2);
        assert!(m.distribution.iter().all(|p| (p - 0.5).abs() < 1e-15));
        let expected_index = if m.outcome == 0 { 0b01 } else { 0b10 };
        assert!((m.post_state.amplitudes()[expected_index] - c(1.0)).norm() < 1e-12);
        assert!(s.measure(&[], &mut rng).is_err());
    }

    #[test]
    fn basis_measurement_is_deterministic() {
        let l = RegisterLayout::new(&[("A", 3)]).unwrap();
        let s = StateVector::basis(l, 0b110).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..10 {
            let m = s.measure(&[0, 2], &mut rng).unwrap();
            assert_eq!(m.outcome_bits(), "10");
            assert_eq!(m.post_state, s);
        }
    }

    #[test]
    fn zero_probability_projection() {
        let s = bell();
        assert_eq!(
            s.project_normalized(&Projector::new(vec![0, 1], 0b00)),
            Err(QsimError::ZeroProbability)
        );
        assert!(s.project(&Projector::new(vec![0], 2)).is_err());
    }

    #[test]
    fn phase_insensitive_comparison() {
        let a = bell();
        let rotated: Vec<Complex64> = a.amplitudes().iter().map(|x| x * Complex64::new(0.0, 1.0)).collect();
        let b = StateVector::from_amplitudes(a.layout().clone(), rotated).unwrap();
        assert!(a.max_deviation(&b) > 0.5);
        assert!(a.max_deviation_up_to_phase(&b) < 1e-15);
    }
}
