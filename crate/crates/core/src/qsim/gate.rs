use std::fmt;

use num_complex::Complex64;

use super::{check_distinct, gather, mask, QsimError, RegisterLayout, Result};

/// Primitive gates. Qubits are global layout positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gate {
    I(usize),
    H(usize),
    X(usize),
    Z(usize),
    Cnot { control: usize, target: usize },
    /// `|k>|x>|b> -> |k>|x>|b xor [k == x]>`.
    OracleDelta { k: Vec<usize>, x: Vec<usize>, f: usize },
    /// `|k>|x>|b> -> |k>|x>|b xor f_k(x)>` with `k = (f(0), f(1))`.
    OracleDeutsch { k: [usize; 2], x: usize, f: usize },
    /// Inversion about the mean on `x`: `2|s><s| - I`.
    Diffusion { x: Vec<usize> },
}

impl Gate {
    pub fn oracle_delta(layout: &RegisterLayout, k: &str, x: &str, f: &str) -> Result<Self> {
        let (kq, xq, fq) = (layout.qubits_of(&[k])?, layout.qubits_of(&[x])?, layout.qubits_of(&[f])?);
        if kq.len() != xq.len() {
            return Err(QsimError::WidthMismatch(format!("{k} has {} qubits, {x} has {}", kq.len(), xq.len())));
        }
        if fq.len() != 1 {
            return Err(QsimError::WidthMismatch(format!("{f} must be a single qubit")));
        }
        Ok(Gate::OracleDelta { k: kq, x: xq, f: fq[0] })
    }

    pub fn oracle_deutsch(layout: &RegisterLayout, k: &str, x: &str, f: &str) -> Result<Self> {
        let (kq, xq, fq) = (layout.qubits_of(&[k])?, layout.qubits_of(&[x])?, layout.qubits_of(&[f])?);
        if kq.len() != 2 || xq.len() != 1 || fq.len() != 1 {
            return Err(QsimError::WidthMismatch(format!(
                "Deutsch oracle needs widths (2, 1, 1), found ({}, {}, {})",
                kq.len(),
                xq.len(),
                fq.len()
            )));
        }
        Ok(Gate::OracleDeutsch { k: [kq[0], kq[1]], x: xq[0], f: fq[0] })
    }

    pub fn diffusion(layout: &RegisterLayout, x: &str) -> Result<Self> {
        Ok(Gate::Diffusion { x: layout.qubits_of(&[x])? })
    }

    /// Every qubit the gate reads or writes.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::I(q) | Gate::H(q) | Gate::X(q) | Gate::Z(q) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::OracleDelta { k, x, f } => k.iter().chain(x).copied().chain([*f]).collect(),
            Gate::OracleDeutsch { k, x, f } => vec![k[0], k[1], *x, *f],
            Gate::Diffusion { x } => x.clone(),
        }
    }

    /// Qubits whose computational-basis value the gate may change.
    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::I(_) | Gate::Z(_) => vec![],
            Gate::H(q) | Gate::X(q) => vec![*q],
            Gate::Cnot { target, .. } => vec![*target],
            Gate::OracleDelta { f, .. } | Gate::OracleDeutsch { f, .. } => vec![*f],
            Gate::Diffusion { x } => x.clone(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_distinct(&self.qubits(), n)
    }

    /// Every primitive here is its own inverse.
    pub fn inverse(&self) -> Gate {
        self.clone()
    }

    pub(crate) fn apply_in_place(&self, amps: &mut [Complex64], n: usize) {
        let dim = amps.len();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Gate::I(_) => {}
            Gate::H(q) => {
                let m = mask(*q, n);
                for i in (0..dim).filter(|i| i & m == 0) {
                    let (a, b) = (amps[i], amps[i | m]);
                    amps[i] = (a + b) * s;
                    amps[i | m] = (a - b) * s;
                }
            }
            Gate::X(q) => {
                let m = mask(*q, n);
                for i in (0..dim).filter(|i| i & m == 0) {
                    amps.swap(i, i | m);
                }
            }
            Gate::Z(q) => {
                let m = mask(*q, n);
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & m != 0 {
                        *a = -*a;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let (c, t) = (mask(*control, n), mask(*target, n));
                for i in (0..dim).filter(|i| i & c != 0 && i & t == 0) {
                    amps.swap(i, i | t);
                }
            }
            Gate::OracleDelta { k, x, f } => {
                let fm = mask(*f, n);
                for i in (0..dim).filter(|i| i & fm == 0) {
                    if gather(i, k, n) == gather(i, x, n) {
                        amps.swap(i, i | fm);
                    }
                }
            }
            Gate::OracleDeutsch { k, x, f } => {
                let fm = mask(*f, n);
                for i in (0..dim).filter(|i| i & fm == 0) {
                    let kv = gather(i, k, n);
                    let xv = gather(i, &[*x], n);
                    // k = (f(0), f(1)): f(x) is bit x of k counted from the left
                    if (kv >> (1 - xv)) & 1 == 1 {
                        amps.swap(i, i | fm);
                    }
                }
            }
            Gate::Diffusion { x } => {
                let xmask: usize = x.iter().map(|&q| mask(q, n)).sum();
                let size = 1usize << x.len();
                let mut block = Vec::with_capacity(size);
                let mut members = Vec::with_capacity(size);
                for base in (0..dim).filter(|i| i & xmask == 0) {
                    members.clear();
                    block.clear();
                    for v in 0..size {
                        let idx = super::scatter(base, x, n, v);
                        members.push(idx);
                        block.push(amps[idx]);
                    }
                    let mean = block.iter().sum::<Complex64>() / size as f64;
                    for (idx, a) in members.iter().zip(&block) {
                        amps[*idx] = mean * 2.0 - a;
                    }
                }
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |q: &[usize]| q.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Gate::I(q) => write!(f, "I({q})"),
            Gate::H(q) => write!(f, "H({q})"),
            Gate::X(q) => write!(f, "X({q})"),
            Gate::Z(q) => write!(f, "Z({q})"),
            Gate::Cnot { control, target } => write!(f, "CNOT({control}->{target})"),
            Gate::OracleDelta { k, x, f: t } => write!(f, "DELTA(k=[{}], x=[{}], f={t})", list(k), list(x)),
            Gate::OracleDeutsch { k, x, f: t } => write!(f, "DEUTSCH(k=[{}], x={x}, f={t})", list(k)),
            Gate::Diffusion { x } => write!(f, "DIFFUSE([{}])", list(x)),
        }
    }
}

/// An ordered gate list, validated against a layout's qubit count.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GateSequence {
    gates: Vec<Gate>,
}

impl GateSequence {
    pub fn new(gates: Vec<Gate>, layout: &RegisterLayout) -> Result<Self> {
        for g in &gates {
            g.validate(layout.num_qubits())?;
        }
        Ok(Self { gates })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Reversed sequence of inverses.
    pub fn inverse(&self) -> Self {
        Self { gates: self.gates.iter().rev().map(Gate::inverse).collect() }
    }

    /// Number of oracle blocks in the sequence.
    pub fn oracle_calls(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| matches!(g, Gate::OracleDelta { .. } | Gate::OracleDeutsch { .. }))
            .count()
    }

    /// First gate that changes the basis value of one of `qubits`, if any.
    pub fn first_targeting(&self, qubits: &[usize]) -> Option<&Gate> {
        self.gates.iter().find(|g| g.targets().iter().any(|t| qubits.contains(t)))
    }

    pub(crate) fn validate_for(&self, n: usize) -> Result<()> {
        self.gates.iter().try_for_each(|g| g.validate(n))
    }
}
