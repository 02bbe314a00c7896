//! Extended Grover and Deutsch algorithms.
//!
//! Both algorithms get an extra register `K` in uniform superposition holding
//! the problem instance (the marked location, or the chosen function), so the
//! final state entangles every instance with its solution. From those runs we
//! compute the entropic speed-up measure `delta_s`, the reduction measure
//! `delta_r`, and their relations, and we check that measurements at the end
//! can be moved back to the preparation.

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::machine::{self, FluxConfiguration, MachineCircuit};
use crate::qsim::{
    self, backward_preparation, joint_distribution_measured_first, joint_distribution_measured_last, prepare, Gate,
    GateSequence, Projector, QsimError, RegisterLayout, RegisterPrep, StateVector,
};

/// Slack allowed on entropy comparisons.
pub const METRIC_TOLERANCE: f64 = 1e-9;
/// Amplitude tolerance for state-equality checks.
pub const STATE_TOLERANCE: f64 = 1e-12;
/// Largest register width [`run_extended_grover`] accepts.
pub const MAX_GROVER_QUBITS: usize = 10;
/// Distributions with more nonzero entries than this are summarized.
pub const MAX_REPORTED_OUTCOMES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgorithmError {
    #[error("register width {0} out of range 1..={MAX_GROVER_QUBITS}")]
    WidthOutOfRange(usize),
    #[error("N = {0} is not a power of two")]
    NotPowerOfTwo(u64),
    #[error("outcome k = {0} has zero probability")]
    ZeroProbability(String),
    #[error("bit index {bit} out of range for a {width}-qubit register")]
    InvalidBit { bit: usize, width: usize },
    #[error("operation needs an extended Grover run with N = 4, got {algorithm} with N = {big_n}")]
    NeedsExactGrover { algorithm: String, big_n: u64 },
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Machine(#[from] machine::MachineError),
}

pub type Result<T> = std::result::Result<T, AlgorithmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ExtendedGrover,
    ExtendedDeutsch,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ExtendedGrover => "extended_grover",
            Algorithm::ExtendedDeutsch => "extended_deutsch",
        }
    }
}

/// Query counts as functions of problem size.
pub struct SpeedupModel {
    quantum: Box<dyn Fn(u64) -> u64 + Send + Sync>,
    classical: Box<dyn Fn(u64) -> u64 + Send + Sync>,
}

impl SpeedupModel {
    pub fn new(
        quantum: impl Fn(u64) -> u64 + Send + Sync + 'static,
        classical: impl Fn(u64) -> u64 + Send + Sync + 'static,
    ) -> Self {
        Self { quantum: Box::new(quantum), classical: Box::new(classical) }
    }

    /// Quantum side: the default Grover iteration count. Classical side:
    /// `M - 1` probes, the last location being inferred.
    pub fn grover() -> Self {
        Self::new(|n| grover_iterations(n) as u64, |m| m.saturating_sub(1))
    }

    pub fn quantum_queries(&self, n: u64) -> u64 {
        (self.quantum)(n)
    }

    pub fn classical_queries(&self, m: u64) -> u64 {
        (self.classical)(m)
    }
}

impl Default for SpeedupModel {
    fn default() -> Self {
        Self::grover()
    }
}

/// Grover round count closest to the success maximum,
/// `round(pi / (4 theta) - 1/2)` with `sin theta = 1/sqrt(N)`.
pub fn grover_iterations(big_n: u64) -> usize {
    if big_n <= 1 {
        return 0;
    }
    let theta = (1.0 / (big_n as f64).sqrt()).asin();
    (std::f64::consts::PI / (4.0 * theta) - 0.5).round() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaS {
    /// `lg(N) / 2`.
    pub nominal: f64,
    /// `lg N - lg M` for the smallest power-of-two `M` the classical
    /// algorithm solves with as many queries as the quantum one spends on `N`.
    pub operational: f64,
    pub reduced_size: u64,
}

pub fn delta_s(big_n: u64, model: &SpeedupModel) -> Result<DeltaS> {
    if !big_n.is_power_of_two() {
        return Err(AlgorithmError::NotPowerOfTwo(big_n));
    }
    let lg_n = big_n.trailing_zeros() as f64;
    let budget = model.quantum_queries(big_n);
    let mut m = 1u64;
    while m < big_n && model.classical_queries(m) < budget {
        m <<= 1;
    }
    Ok(DeltaS { nominal: lg_n / 2.0, operational: lg_n - m.trailing_zeros() as f64, reduced_size: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaR {
    /// Entropy of the measured registers' computational-basis populations
    /// (the reading once a pointer has dephased them).
    pub shannon: f64,
    /// Von Neumann entropy of the same reduced state.
    pub von_neumann: f64,
}

pub fn delta_r(state: &StateVector, measured: &[usize]) -> Result<DeltaR> {
    let populations = state.marginal_probabilities(measured)?;
    Ok(DeltaR {
        shannon: qsim_shannon(&populations),
        von_neumann: state.entanglement_entropy(measured)?,
    })
}

fn qsim_shannon(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > qsim::EIGEN_CUTOFF).map(|&x| -x * x.log2()).sum::<f64>().max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateFingerprint {
    /// SHA-256 over the little-endian `(re, im)` bytes of every amplitude.
    pub sha256: String,
    /// Amplitudes as `[re, im]`, present for states of at most 64 entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
}

impl StateFingerprint {
    pub fn of(state: &StateVector) -> Self {
        let mut h = Sha256::new();
        for a in state.amplitudes() {
            // +0.0 folds negative zero into positive zero
            h.update((a.re + 0.0).to_le_bytes());
            h.update((a.im + 0.0).to_le_bytes());
        }
        let sha256 = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let amplitudes = (state.amplitudes().len() <= 64)
            .then(|| state.amplitudes().iter().map(|a| [a.re + 0.0, a.im + 0.0]).collect());
        Self { sha256, amplitudes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeProbability {
    pub k: String,
    pub x: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignNote {
    pub k: String,
    /// Sign of the circuit's amplitude relative to the all-positive reference.
    pub relative_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub algorithm: Algorithm,
    #[serde(rename = "N")]
    pub big_n: u64,
    /// Qubits in register `K`.
    pub n: usize,
    pub iterations: usize,
    pub oracle_calls: usize,
    /// True when the run is error-free (Grover at N = 4, Deutsch always).
    pub exact: bool,
    pub final_state: StateFingerprint,
    /// Nonzero entries of the exact `(k, x)` distribution.
    pub distribution: Vec<OutcomeProbability>,
    pub distribution_truncated: bool,
    /// Probability that `x` is the right answer for `k`.
    pub success_probability: f64,
    pub sampled_k: String,
    pub sampled_x: String,
    pub delta_s_nominal: f64,
    pub delta_s_operational: f64,
    /// The operational value extrapolates a run that is not error-free.
    pub delta_s_operational_extrapolated: bool,
    pub delta_r: f64,
    pub delta_r_von_neumann: f64,
    /// `delta_s_nominal <= delta_r + METRIC_TOLERANCE`.
    pub inequality_ok: bool,
    pub inequality_operational_ok: bool,
    /// `delta_s_nominal == delta_r / 2` within `METRIC_TOLERANCE`.
    pub half_ratio_ok: bool,
    /// Per-`k` signs relative to the all-positive reference state, listing
    /// only the components that differ.
    pub sign_discrepancies: Vec<SignNote>,
    pub seed: u64,
}

/// A finished run together with the states and gates that produced it.
#[derive(Debug, Clone)]
pub struct ExtendedRun {
    pub layout: RegisterLayout,
    pub prep: StateVector,
    pub gates: GateSequence,
    pub final_state: StateVector,
    /// `K` then `X` qubits.
    pub measured: Vec<usize>,
    pub report: RunReport,
}

impl ExtendedRun {
    pub fn k_qubits(&self) -> Vec<usize> {
        self.layout.qubits_of(&["K"]).expect("layout has K")
    }

    pub fn x_qubits(&self) -> Vec<usize> {
        self.layout.qubits_of(&["X"]).expect("layout has X")
    }
}

fn bits(value: usize, width: usize) -> String {
    (0..width).map(|i| if (value >> (width - 1 - i)) & 1 == 1 { '1' } else { '0' }).collect()
}

fn outcome_table(dist: &[f64], kw: usize, xw: usize) -> (Vec<OutcomeProbability>, bool) {
    let nonzero: Vec<(usize, f64)> = dist.iter().copied().enumerate().filter(|&(_, p)| p > 1e-15).collect();
    let truncated = nonzero.len() > MAX_REPORTED_OUTCOMES;
    let rows = nonzero
        .into_iter()
        .take(MAX_REPORTED_OUTCOMES)
        .map(|(i, p)| OutcomeProbability { k: bits(i >> xw, kw), x: bits(i & ((1 << xw) - 1), xw), probability: p })
        .collect();
    (rows, truncated)
}

/// Grover search on `X` with the marked location held in superposition in `K`.
pub fn run_extended_grover(n: usize, seed: u64, iterations: Option<usize>) -> Result<ExtendedRun> {
    if n == 0 || n > MAX_GROVER_QUBITS {
        return Err(AlgorithmError::WidthOutOfRange(n));
    }
    let big_n = 1u64 << n;
    let iterations = iterations.unwrap_or_else(|| grover_iterations(big_n));
    let layout = RegisterLayout::new(&[("K", n), ("X", n), ("F", 1)])?;
    let prep = prepare(
        &layout,
        &[("K", RegisterPrep::Uniform), ("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)],
    )?;
    let round = [Gate::oracle_delta(&layout, "K", "X", "F")?, Gate::diffusion(&layout, "X")?];
    let gates = GateSequence::new(round.iter().cycle().take(2 * iterations).cloned().collect(), &layout)?;
    let final_state = prep.apply(&gates)?;

    let k_qubits = layout.qubits_of(&["K"])?;
    let measured = layout.qubits_of(&["K", "X"])?;
    let dist = final_state.marginal_probabilities(&measured)?;
    let success_probability: f64 = (0..1usize << n).map(|k| dist[(k << n) | k]).sum::<f64>() ;

    let dr = delta_r(&final_state, &k_qubits)?;
    let ds = delta_s(big_n, &SpeedupModel::grover())?;
    let mut rng = machine::seeded_rng(seed);
    let sample = final_state.measure(&measured, &mut rng)?;
    let (distribution, distribution_truncated) = outcome_table(&dist, n, n);

    let report = RunReport {
        algorithm: Algorithm::ExtendedGrover,
        big_n,
        n,
        iterations,
        oracle_calls: gates.oracle_calls(),
        exact: big_n == 4 && iterations == 1,
        final_state: StateFingerprint::of(&final_state),
        distribution,
        distribution_truncated,
        success_probability,
        sampled_k: bits((sample.outcome >> n) as usize, n),
        sampled_x: bits((sample.outcome as usize) & ((1 << n) - 1), n),
        delta_s_nominal: ds.nominal,
        delta_s_operational: ds.operational,
        delta_s_operational_extrapolated: !(big_n == 4 && iterations == 1),
        delta_r: dr.shannon,
        delta_r_von_neumann: dr.von_neumann,
        inequality_ok: ds.nominal <= dr.shannon + METRIC_TOLERANCE,
        inequality_operational_ok: ds.operational <= dr.shannon + METRIC_TOLERANCE,
        half_ratio_ok: (ds.nominal - dr.shannon / 2.0).abs() <= METRIC_TOLERANCE,
        sign_discrepancies: Vec::new(),
        seed,
    };
    Ok(ExtendedRun { layout, prep, gates, final_state, measured, report })
}

/// `(|00>|00> + |01>|01> + |10>|10> + |11>|11>) (|0> - |1>) / (2 sqrt 2)`.
pub fn grover_reference_state() -> Result<StateVector> {
    let layout = RegisterLayout::new(&[("K", 2), ("X", 2), ("F", 1)])?;
    let a = 1.0 / (2.0 * 2f64.sqrt());
    let mut amps = vec![Complex64::new(0.0, 0.0); 32];
    for k in 0..4usize {
        let base = (k << 3) | (k << 1);
        amps[base] = Complex64::new(a, 0.0);
        amps[base | 1] = Complex64::new(-a, 0.0);
    }
    Ok(StateVector::from_amplitudes(layout, amps)?)
}

/// `[(|00> + |11>)|0> + (|01> + |10>)|1>] (|0> - |1>) / (2 sqrt 2)`.
pub fn deutsch_reference_state() -> Result<StateVector> {
    let layout = RegisterLayout::new(&[("K", 2), ("X", 1), ("F", 1)])?;
    let a = 1.0 / (2.0 * 2f64.sqrt());
    let mut amps = vec![Complex64::new(0.0, 0.0); 16];
    for k in 0..4usize {
        let x = balanced(k);
        let base = (k << 2) | (x << 1);
        amps[base] = Complex64::new(a, 0.0);
        amps[base | 1] = Complex64::new(-a, 0.0);
    }
    Ok(StateVector::from_amplitudes(layout, amps)?)
}

/// `f(0) xor f(1)` for the function encoded as `k = (f(0), f(1))`.
pub fn balanced(k: usize) -> usize {
    ((k >> 1) ^ k) & 1
}

/// Deutsch's algorithm with the chosen function held in superposition in `K`.
pub fn run_extended_deutsch(seed: u64) -> Result<ExtendedRun> {
    let layout = RegisterLayout::new(&[("K", 2), ("X", 1), ("F", 1)])?;
    let prep = prepare(
        &layout,
        &[("K", RegisterPrep::Uniform), ("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)],
    )?;
    let x = layout.qubit("X", 0)?;
    let gates = GateSequence::new(vec![Gate::oracle_deutsch(&layout, "K", "X", "F")?, Gate::H(x)], &layout)?;
    let final_state = prep.apply(&gates)?;

    let measured = layout.qubits_of(&["K", "X"])?;
    let dist = final_state.marginal_probabilities(&measured)?;
    let success_probability: f64 = (0..4usize).map(|k| dist[(k << 1) | balanced(k)]).sum();

    let reference = deutsch_reference_state()?;
    let sign_discrepancies = relative_signs(&final_state, &reference, 2, 2)
        .into_iter()
        .filter(|n| n.relative_sign != 1)
        .collect();

    let dr = delta_r(&final_state, &measured)?;
    let ds = delta_s(4, &SpeedupModel::grover())?;
    let mut rng = machine::seeded_rng(seed);
    let sample = final_state.measure(&measured, &mut rng)?;
    let (distribution, distribution_truncated) = outcome_table(&dist, 2, 1);

    let report = RunReport {
        algorithm: Algorithm::ExtendedDeutsch,
        big_n: 4,
        n: 2,
        iterations: 1,
        oracle_calls: gates.oracle_calls(),
        exact: true,
        final_state: StateFingerprint::of(&final_state),
        distribution,
        distribution_truncated,
        success_probability,
        sampled_k: bits((sample.outcome >> 1) as usize, 2),
        sampled_x: bits((sample.outcome & 1) as usize, 1),
        delta_s_nominal: ds.nominal,
        delta_s_operational: ds.operational,
        delta_s_operational_extrapolated: false,
        delta_r: dr.shannon,
        delta_r_von_neumann: dr.von_neumann,
        inequality_ok: ds.nominal <= dr.shannon + METRIC_TOLERANCE,
        inequality_operational_ok: ds.operational <= dr.shannon + METRIC_TOLERANCE,
        half_ratio_ok: (ds.nominal - dr.shannon / 2.0).abs() <= METRIC_TOLERANCE,
        sign_discrepancies,
        seed,
    };
    Ok(ExtendedRun { layout, prep, gates, final_state, measured, report })
}

/// For each value of the leading `kw` qubits, the sign of `state` relative to
/// `reference` on their common support, normalized so the first `k` is `+1`.
pub fn relative_signs(state: &StateVector, reference: &StateVector, kw: usize, k_shift: usize) -> Vec<SignNote> {
    let raw: Vec<f64> = (0..1usize << kw)
        .map(|k| {
            let block = k << k_shift;
            (block..block + (1 << k_shift))
                .find(|&i| reference.amplitudes()[i].norm() > 1e-12)
                .map(|i| (state.amplitudes()[i] / reference.amplitudes()[i]).re.signum())
                .unwrap_or(1.0)
        })
        .collect();
    let first = raw[0];
    raw.iter()
        .enumerate()
        .map(|(k, &s)| SignNote { k: bits(k, kw), relative_sign: if s * first > 0.0 { 1 } else { -1 } })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackdateCheck {
    pub kind: String,
    pub outcome: String,
    /// Largest amplitude deviation (up to global phase) of the backdated
    /// preparation from the expected one.
    pub max_deviation: f64,
    /// Largest deviation between the gates applied to the backdated
    /// preparation and the projected final state.
    pub forward_deviation: f64,
    /// `max_x |p(x) - 1/N|` of the backdated `X` register.
    pub x_uniform_deviation: f64,
    /// Shannon entropy of `K` populations before and after backdating.
    pub k_entropy_before: f64,
    pub k_entropy_after: f64,
    pub information_gain: f64,
    /// Same deviation as `x_uniform_deviation` when the joint outcome
    /// `(K, X) = (k, k)` is backdated instead of `K` alone.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_x_uniform_deviation: Option<f64>,
    /// Deviation of the non-extended algorithm (K fixed to `k`) from the
    /// post-measurement state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_algorithm_deviation: Option<f64>,
    pub pass: bool,
}

fn register_state_uniformity(state: &StateVector, qubits: &[usize]) -> Result<f64> {
    let p = state.marginal_probabilities(qubits)?;
    let u = 1.0 / p.len() as f64;
    Ok(p.iter().map(|x| (x - u).abs()).fold(0.0, f64::max))
}

fn k_entropy(state: &StateVector, k: &[usize]) -> Result<f64> {
    Ok(qsim_shannon(&state.marginal_probabilities(k)?))
}

fn require_grover(run: &ExtendedRun) -> Result<()> {
    if run.report.algorithm != Algorithm::ExtendedGrover {
        return Err(AlgorithmError::NeedsExactGrover {
            algorithm: run.report.algorithm.name().into(),
            big_n: run.report.big_n,
        });
    }
    Ok(())
}

/// Backdates the reduction `K = k` to the preparation.
pub fn backdate_full(run: &ExtendedRun, k: u64) -> Result<BackdateCheck> {
    require_grover(run)?;
    let n = run.report.n;
    let label = bits(k as usize, n);
    let (kq, xq) = (run.k_qubits(), run.x_qubits());
    if k >> n != 0 {
        return Err(AlgorithmError::ZeroProbability(label));
    }
    let projector = Projector::new(kq.clone(), k);
    let back = backward_preparation(&run.gates, &run.prep, &projector).map_err(|e| zero_prob(e, &label))?;

    let original = prepare(
        &run.layout,
        &[("K", RegisterPrep::Basis(k)), ("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)],
    )?;
    let max_deviation = back.max_deviation_up_to_phase(&original);

    let collapsed = run.final_state.project_normalized(&projector)?;
    let forward_deviation = back.apply(&run.gates)?.max_deviation(&collapsed);
    let original_algorithm_deviation = original.apply(&run.gates)?.max_deviation_up_to_phase(&collapsed);

    let joint = Projector::new(run.measured.clone(), (k << n) | k);
    let joint_x = match backward_preparation(&run.gates, &run.prep, &joint) {
        Ok(s) => Some(register_state_uniformity(&s, &xq)?),
        Err(QsimError::ZeroProbability) => None,
        Err(e) => return Err(e.into()),
    };

    let before = k_entropy(&run.prep, &kq)?;
    let after = k_entropy(&back, &kq)?;
    Ok(BackdateCheck {
        kind: "full".into(),
        outcome: format!("K={label}"),
        max_deviation,
        forward_deviation,
        x_uniform_deviation: register_state_uniformity(&back, &xq)?,
        k_entropy_before: before,
        k_entropy_after: after,
        information_gain: before - after,
        joint_x_uniform_deviation: joint_x,
        original_algorithm_deviation: Some(original_algorithm_deviation),
        pass: max_deviation <= STATE_TOLERANCE
            && forward_deviation <= STATE_TOLERANCE
            && original_algorithm_deviation <= STATE_TOLERANCE,
    })
}

fn zero_prob(e: QsimError, label: &str) -> AlgorithmError {
    match e {
        QsimError::ZeroProbability => AlgorithmError::ZeroProbability(label.to_string()),
        other => other.into(),
    }
}

/// Backdates the reduction "bit `bit` of `X` equals `value`" in an N = 4
/// extended Grover run.
pub fn backdate_partial(run: &ExtendedRun, bit: usize, value: u8) -> Result<BackdateCheck> {
    require_grover(run)?;
    if run.report.big_n != 4 {
        return Err(AlgorithmError::NeedsExactGrover {
            algorithm: run.report.algorithm.name().into(),
            big_n: run.report.big_n,
        });
    }
    let n = run.report.n;
    if bit >= n {
        return Err(AlgorithmError::InvalidBit { bit, width: n });
    }
    let (kq, xq) = (run.k_qubits(), run.x_qubits());
    let label = format!("X[{bit}]={value}");
    let projector = Projector::new(vec![xq[bit]], value as u64 & 1);
    let back = backward_preparation(&run.gates, &run.prep, &projector).map_err(|e| zero_prob(e, &label))?;

    // K spread evenly over the k whose designated bit is `value`
    let mut amps = vec![Complex64::new(0.0, 0.0); run.layout.dim()];
    let matching: Vec<usize> = (0..1usize << n).filter(|k| (k >> (n - 1 - bit)) & 1 == value as usize).collect();
    let x_uniform = prepare(&run.layout, &[("X", RegisterPrep::Uniform), ("F", RegisterPrep::Minus)])?;
    let scale = 1.0 / (matching.len() as f64).sqrt();
    for (i, a) in x_uniform.amplitudes().iter().enumerate() {
        if a.norm() > 0.0 {
            for &k in &matching {
                amps[i | (k << (n + 1))] = a * scale;
            }
        }
    }
    let expected = StateVector::from_amplitudes(run.layout.clone(), amps)?;
    let max_deviation = back.max_deviation_up_to_phase(&expected);

    let collapsed = run.final_state.project_normalized(&projector)?;
    let forward_deviation = back.apply(&run.gates)?.max_deviation(&collapsed);
    let before = k_entropy(&run.prep, &kq)?;
    let after = k_entropy(&back, &kq)?;
    let information_gain = before - after;
    Ok(BackdateCheck {
        kind: "partial".into(),
        outcome: label,
        max_deviation,
        forward_deviation,
        x_uniform_deviation: register_state_uniformity(&back, &xq)?,
        k_entropy_before: before,
        k_entropy_after: after,
        information_gain,
        joint_x_uniform_deviation: None,
        original_algorithm_deviation: None,
        pass: max_deviation <= STATE_TOLERANCE
            && forward_deviation <= STATE_TOLERANCE
            && (information_gain - 1.0).abs() <= METRIC_TOLERANCE,
    })
}

/// Largest gap between the joint `(k, x)` distributions when `K` is measured
/// before the gates instead of after.
pub fn measurement_order_deviation(run: &ExtendedRun) -> Result<f64> {
    let (kq, xq) = (run.k_qubits(), run.x_qubits());
    let first = joint_distribution_measured_first(&run.prep, &run.gates, &kq, &xq)?;
    let last = joint_distribution_measured_last(&run.prep, &run.gates, &kq, &xq)?;
    Ok(first.iter().zip(&last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub delta_s: f64,
    pub delta_r: f64,
    /// `delta_s <= delta_r`.
    pub bounded: bool,
    pub bounded_operational: bool,
    /// `delta_s == delta_r / 2`.
    pub half_ratio: bool,
}

pub fn check_inequality(report: &RunReport) -> InequalityCheck {
    InequalityCheck {
        delta_s: report.delta_s_nominal,
        delta_r: report.delta_r,
        bounded: report.delta_s_nominal <= report.delta_r + METRIC_TOLERANCE,
        bounded_operational: report.delta_s_operational <= report.delta_r + METRIC_TOLERANCE,
        half_ratio: (report.delta_s_nominal - report.delta_r / 2.0).abs() <= METRIC_TOLERANCE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Populations {
    pub x11: f64,
    pub x22: f64,
    pub y11: f64,
    pub y22: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrespondenceReport {
    pub pre_measurement: Populations,
    pub pre_configuration: FluxConfiguration,
    pub pre_nonlinear_residual: f64,
    pub pre_valid: bool,
    /// Measured value of qubit `X`.
    pub outcome: u8,
    pub post_measurement: Populations,
    pub post_configuration: FluxConfiguration,
    pub post_valid: bool,
    /// `max |x11 + x22 - 1|, |y11 + y22 - 1|` over both states.
    pub trace_deviation: f64,
}

fn pair_populations(state: &StateVector) -> Result<Populations> {
    let x = state.reduce(&[0])?;
    let y = state.reduce(&[1])?;
    Ok(Populations { x11: x.populations()[0], x22: x.populations()[1], y11: y.populations()[0], y22: y.populations()[1] })
}

/// Fluxes with `Q = 1`: `X = x11`, `Y = y11`.
fn to_configuration(p: &Populations) -> FluxConfiguration {
    FluxConfiguration { q: 1.0, fluxes: vec![vec![p.x11, p.y11]] }
}

/// Two-branch circuit of the single unconstrained variable.
pub fn free_variable_circuit() -> MachineCircuit {
    let sys = crate::boolsys::BooleanSystem::with_free_variables(vec!["x".into()], vec![])
        .expect("one named variable");
    machine::build_circuit(&sys)
}

/// `(|0>_X |1>_Y + |1>_X |0>_Y) / sqrt 2`, built from `|00>`, and the gates used.
pub fn anticorrelated_pair() -> Result<(StateVector, GateSequence)> {
    let layout = RegisterLayout::new(&[("X", 1), ("Y", 1)])?;
    let zero = prepare(&layout, &[])?;
    let gates = GateSequence::new(vec![Gate::H(0), Gate::X(1), Gate::Cnot { control: 0, target: 1 }], &layout)?;
    Ok((zero.apply(&gates)?, gates))
}

/// Maps the pair's populations before and after measuring `X` onto the
/// free-variable machine and validates both configurations.
pub fn correspondence_check(seed: u64) -> Result<CorrespondenceReport> {
    let (pair, _) = anticorrelated_pair()?;
    let circuit = free_variable_circuit();
    let pre = pair_populations(&pair)?;
    let pre_cfg = to_configuration(&pre);
    let pre_report = machine::validate_configuration(&circuit, &pre_cfg, machine::DEFAULT_TOLERANCE)?;

    let mut rng = machine::seeded_rng(seed);
    let m = pair.measure(&[0], &mut rng)?;
    let post = pair_populations(&m.post_state)?;
    let post_cfg = to_configuration(&post);
    let post_report = machine::validate_configuration(&circuit, &post_cfg, machine::DEFAULT_TOLERANCE)?;

    let trace_deviation = [&pre, &post]
        .iter()
        .flat_map(|p| [(p.x11 + p.x22 - 1.0).abs(), (p.y11 + p.y22 - 1.0).abs()])
        .fold(0.0, f64::max);
    Ok(CorrespondenceReport {
        pre_measurement: pre,
        pre_configuration: pre_cfg,
        pre_nonlinear_residual: pre_report.nonlinear[0],
        pre_valid: pre_report.valid,
        outcome: m.outcome as u8,
        post_measurement: post,
        post_configuration: post_cfg,
        post_valid: post_report.valid,
        trace_deviation,
    })
}
