//! The idealized hydraulic constraint machine.
//!
//! A [`BooleanSystem`] compiles into an input branch carrying flux `Q` in
//! series with one group of parallel branches per NAND equation (a
//! quadruple, one branch per satisfying truth-table row) and one two-branch
//! group per unconstrained variable. Inside a group the fluxes obey
//!
//! ```text
//! sum_j X_j = Q        sum_j X_j^2 = Q^2
//! ```
//!
//! which for non-negative fluxes and `Q > 0` forces exactly one branch to carry
//! all of `Q`. Linkage constraints conserve the total flux through branches
//! carrying the same value of the same variable across groups, so a valid
//! configuration spells out a satisfying assignment of the whole system.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::boolsys::{self, Assignment, BoolSysError, BooleanSystem, VarId};

/// Residual tolerance used when none is given.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Largest number of NAND quadruples [`enumerate_configurations`] accepts.
pub const MAX_ENUMERATED_QUADRUPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MachineError {
    #[error("no motion possible: the system has no solution")]
    NoMotion,
    #[error("configuration shape does not match the circuit: {0}")]
    DimensionMismatch(String),
    #[error("fluxes must be finite and non-negative, found {0}")]
    NegativeFlux(f64),
    #[error("input flux must be positive, found {0}")]
    NonPositiveInput(f64),
    #[error("group {0} has no branch carrying more than Q/2")]
    NoDominantBranch(usize),
    #[error("branch labels disagree on variable `{0}`")]
    LabelConflict(String),
    #[error("decoded assignment does not satisfy the source system")]
    NotASolution,
    #[error("circuit has {found} quadruples, enumeration cap is {cap}")]
    CapExceeded { found: usize, cap: usize },
    #[error(transparent)]
    BoolSys(#[from] BoolSysError),
}

pub type Result<T> = std::result::Result<T, MachineError>;

/// What a group of parallel branches stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    /// Quadruple for equation `equation` of the source system.
    Nand { equation: usize },
    /// Two branches `x = 1`, `x = 0` for a variable used by no equation.
    Free { variable: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub quadruple: usize,
    /// Partial assignment over the group's variables.
    pub label: Vec<(VarId, bool)>,
}

impl Branch {
    pub fn value_of(&self, var: VarId) -> Option<bool> {
        self.label.iter().find(|(v, _)| *v == var).map(|&(_, b)| b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadruple {
    pub kind: GroupKind,
    /// Distinct variables the group mentions, in equation order.
    pub variables: Vec<VarId>,
    pub branches: Vec<Branch>,
}

/// One side of a linkage constraint: a group and the branches whose label
/// carries the tagged value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkageSide {
    pub quadruple: usize,
    pub branches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkageConstraint {
    pub variable: VarId,
    pub value: bool,
    pub left: LinkageSide,
    pub right: LinkageSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineCircuit {
    system: BooleanSystem,
    quadruples: Vec<Quadruple>,
    linkage: Vec<LinkageConstraint>,
}

/// Rows of the NAND truth table as `(in1, in2, out)`.
const NAND_ROWS: [(bool, bool, bool); 4] = [
    (false, false, true),
    (false, true, true),
    (true, false, true),
    (true, true, false),
];

impl MachineCircuit {
    pub fn system(&self) -> &BooleanSystem {
        &self.system
    }

    pub fn quadruples(&self) -> &[Quadruple] {
        &self.quadruples
    }

    pub fn linkage(&self) -> &[LinkageConstraint] {
        &self.linkage
    }

    /// Number of groups that come from NAND equations.
    pub fn nand_quadruples(&self) -> usize {
        self.quadruples
            .iter()
            .filter(|q| matches!(q.kind, GroupKind::Nand { .. }))
            .count()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.quadruples.iter().map(|q| q.branches.len()).collect()
    }

    /// Configuration with flux `q` on `selection[i]` of every group `i`.
    pub fn one_hot(&self, q: f64, selection: &[usize]) -> FluxConfiguration {
        let fluxes = self
            .quadruples
            .iter()
            .zip(selection)
            .map(|(quad, &sel)| (0..quad.branches.len()).map(|j| if j == sel { q } else { 0.0 }).collect())
            .collect();
        FluxConfiguration { q, fluxes }
    }

    fn member(&self, side: &LinkageSide, branch: usize) -> bool {
        side.branches.contains(&branch)
    }

    fn consistent(&self, c: &LinkageConstraint, left_branch: usize, right_branch: usize) -> bool {
        self.member(&c.left, left_branch) == self.member(&c.right, right_branch)
    }
}

/// Compiles a system into its machine circuit.
pub fn build_circuit(sys: &BooleanSystem) -> MachineCircuit {
    let mut quadruples = Vec::new();

    for (ei, eq) in sys.equations().iter().enumerate() {
        let qi = quadruples.len();
        let mut variables = Vec::new();
        for v in [eq.a, eq.b, eq.out] {
            if !variables.contains(&v) {
                variables.push(v);
            }
        }
        // Rows that would give one variable two values (self-referencing
        // equations) have no branch.
        let branches = NAND_ROWS
            .iter()
            .filter_map(|&(a, b, c)| {
                let mut label: Vec<(VarId, bool)> = Vec::with_capacity(3);
                for (v, bit) in [(eq.a, a), (eq.b, b), (eq.out, c)] {
                    match label.iter().find(|(w, _)| *w == v) {
                        Some(&(_, prev)) if prev != bit => return None,
                        Some(_) => {}
                        None => label.push((v, bit)),
                    }
                }
                Some(Branch { quadruple: qi, label })
            })
            .collect();
        quadruples.push(Quadruple { kind: GroupKind::Nand { equation: ei }, variables, branches });
    }

    for v in sys.free_variables() {
        let qi = quadruples.len();
        quadruples.push(Quadruple {
            kind: GroupKind::Free { variable: v.0 },
            variables: vec![v],
            branches: vec![
                Branch { quadruple: qi, label: vec![(v, true)] },
                Branch { quadruple: qi, label: vec![(v, false)] },
            ],
        });
    }

    let mut linkage = Vec::new();
    for vi in 0..sys.num_variables() {
        let var = VarId(vi);
        let holders: Vec<usize> = quadruples
            .iter()
            .enumerate()
            .filter(|(_, q)| q.variables.contains(&var))
            .map(|(i, _)| i)
            .collect();
        for value in [false, true] {
            for pair in holders.windows(2) {
                let side = |qi: usize| LinkageSide {
                    quadruple: qi,
                    branches: quadruples[qi]
                        .branches
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| b.value_of(var) == Some(value))
                        .map(|(j, _)| j)
                        .collect(),
                };
                linkage.push(LinkageConstraint { variable: var, value, left: side(pair[0]), right: side(pair[1]) });
            }
        }
    }

    MachineCircuit { system: sys.clone(), quadruples, linkage }
}

/// Input flux and per-branch fluxes, indexed `[group][branch]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxConfiguration {
    pub q: f64,
    pub fluxes: Vec<Vec<f64>>,
}

impl FluxConfiguration {
    pub fn new(q: f64, fluxes: Vec<Vec<f64>>) -> Result<Self> {
        for &x in std::iter::once(&q).chain(fluxes.iter().flatten()) {
            if !(x.is_finite() && x >= 0.0) {
                return Err(MachineError::NegativeFlux(x));
            }
        }
        Ok(Self { q, fluxes })
    }

    /// Every flux (including `Q`) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            q: self.q * factor,
            fluxes: self.fluxes.iter().map(|g| g.iter().map(|x| x * factor).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    /// `|sum_j X_ij - Q|` per group.
    pub linear: Vec<f64>,
    /// `|sum_j X_ij^2 - Q^2|` per group.
    pub nonlinear: Vec<f64>,
    /// `|sum_left X - sum_right X|` per linkage constraint.
    pub linkage: Vec<f64>,
    pub max_residual: f64,
    pub valid: bool,
}

/// `(|sum X - Q|, |sum X^2 - Q^2|)` for one group of parallel branches.
pub fn group_residuals(q: f64, fluxes: &[f64]) -> (f64, f64) {
    let linear = (fluxes.iter().sum::<f64>() - q).abs();
    let nonlinear = (fluxes.iter().map(|x| x * x).sum::<f64>() - q * q).abs();
    (linear, nonlinear)
}

/// Whether a lone group with input `q` satisfies both flux equations.
pub fn group_is_valid(q: f64, fluxes: &[f64], tol: f64) -> bool {
    let (l, n) = group_residuals(q, fluxes);
    l <= tol && n <= tol && (q > 0.0 || fluxes.iter().all(|&x| x <= tol))
}

pub fn validate_configuration(circuit: &MachineCircuit, cfg: &FluxConfiguration, tol: f64) -> Result<ValidityReport> {
    if cfg.fluxes.len() != circuit.quadruples.len() {
        return Err(MachineError::DimensionMismatch(format!(
            "{} groups given, circuit has {}",
            cfg.fluxes.len(),
            circuit.quadruples.len()
        )));
    }
    for (i, (g, quad)) in cfg.fluxes.iter().zip(&circuit.quadruples).enumerate() {
        if g.len() != quad.branches.len() {
            return Err(MachineError::DimensionMismatch(format!(
                "group {i} has {} fluxes, circuit has {} branches",
                g.len(),
                quad.branches.len()
            )));
        }
    }

    let q = cfg.q;
    let (linear, nonlinear): (Vec<f64>, Vec<f64>) = cfg.fluxes.iter().map(|g| group_residuals(q, g)).unzip();
    let side_flux = |s: &LinkageSide| -> f64 { s.branches.iter().map(|&j| cfg.fluxes[s.quadruple][j]).sum() };
    let linkage: Vec<f64> = circuit
        .linkage
        .iter()
        .map(|c| (side_flux(&c.left) - side_flux(&c.right)).abs())
        .collect();

    let max_residual = linear.iter().chain(&nonlinear).chain(&linkage).fold(0.0_f64, |m, &r| m.max(r));
    let at_rest_ok = q > 0.0 || cfg.fluxes.iter().flatten().all(|&x| x <= tol);
    Ok(ValidityReport { linear, nonlinear, linkage, max_residual, valid: max_residual <= tol && at_rest_ok })
}

/// Reads the solution off a valid configuration with `Q > 0`.
pub fn configuration_to_assignment(circuit: &MachineCircuit, cfg: &FluxConfiguration) -> Result<Assignment> {
    if cfg.q <= 0.0 {
        return Err(MachineError::NonPositiveInput(cfg.q));
    }
    if cfg.fluxes.len() != circuit.quadruples.len() {
        return Err(MachineError::DimensionMismatch("group count".into()));
    }
    let sys = &circuit.system;
    let mut asg = Assignment::new();
    for (i, (quad, g)) in circuit.quadruples.iter().zip(&cfg.fluxes).enumerate() {
        if g.len() != quad.branches.len() {
            return Err(MachineError::DimensionMismatch(format!("group {i}")));
        }
        let j = g.iter().position(|&x| x > cfg.q / 2.0).ok_or(MachineError::NoDominantBranch(i))?;
        for &(v, bit) in &quad.branches[j].label {
            let name = sys.name(v);
            if let Some(prev) = asg.insert(name, bit) {
                if prev != bit {
                    return Err(MachineError::LabelConflict(name.to_string()));
                }
            }
        }
    }
    if !boolsys::validate_assignment(sys, &asg)? {
        return Err(MachineError::NotASolution);
    }
    Ok(asg)
}

/// Every one-hot selection satisfying all linkage constraints, as flux
/// configurations at input flux `q`, in lexicographic branch order.
pub fn enumerate_configurations(circuit: &MachineCircuit, q: f64) -> Result<Vec<FluxConfiguration>> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(MachineError::NonPositiveInput(q));
    }
    Ok(enumerate_selections(circuit)?.iter().map(|s| circuit.one_hot(q, s)).collect())
}

/// Branch selections behind [`enumerate_configurations`].
pub fn enumerate_selections(circuit: &MachineCircuit) -> Result<Vec<Vec<usize>>> {
    let found = circuit.nand_quadruples();
    if found > MAX_ENUMERATED_QUADRUPLES {
        return Err(MachineError::CapExceeded { found, cap: MAX_ENUMERATED_QUADRUPLES });
    }
    let n = circuit.system.num_variables();
    if n > boolsys::DEFAULT_ENUMERATION_CAP {
        return Err(MachineError::BoolSys(BoolSysError::CapExceeded { found: n, cap: boolsys::DEFAULT_ENUMERATION_CAP }));
    }

    // constraints indexed by the later of their two groups
    let groups = circuit.quadruples.len();
    let mut closing: Vec<Vec<&LinkageConstraint>> = vec![Vec::new(); groups];
    for c in &circuit.linkage {
        closing[c.left.quadruple.max(c.right.quadruple)].push(c);
    }

    let mut out = Vec::new();
    let mut selection = Vec::with_capacity(groups);
    fn dfs(
        circuit: &MachineCircuit,
        closing: &[Vec<&LinkageConstraint>],
        selection: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let i = selection.len();
        if i == circuit.quadruples.len() {
            out.push(selection.clone());
            return;
        }
        for j in 0..circuit.quadruples[i].branches.len() {
            selection.push(j);
            let ok = closing[i]
                .iter()
                .all(|c| circuit.consistent(c, selection[c.left.quadruple], selection[c.right.quadruple]));
            if ok {
                dfs(circuit, closing, selection, out);
            }
            selection.pop();
        }
    }
    dfs(circuit, &closing, &mut selection, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Uniform over all valid configurations.
    #[default]
    Exact,
    /// Randomized backtracking with propagation. Not uniform in general.
    Fast,
}

/// Caches the valid selections of a circuit so repeated exact draws are cheap.
#[derive(Debug, Clone)]
pub struct ExactSampler<'a> {
    circuit: &'a MachineCircuit,
    selections: Vec<Vec<usize>>,
}

impl<'a> ExactSampler<'a> {
    pub fn new(circuit: &'a MachineCircuit) -> Result<Self> {
        let selections = enumerate_selections(circuit)?;
        if selections.is_empty() {
            return Err(MachineError::NoMotion);
        }
        Ok(Self { circuit, selections })
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    pub fn selections(&self) -> &[Vec<usize>] {
        &self.selections
    }

    pub fn sample<R: Rng + ?Sized>(&self, q: f64, rng: &mut R) -> FluxConfiguration {
        let k = rng.random_range(0..self.selections.len());
        self.circuit.one_hot(q, &self.selections[k])
    }
}

/// Moves the input piston from rest to `q`, producing one valid configuration.
pub fn sample_transition<R: Rng + ?Sized>(
    circuit: &MachineCircuit,
    q: f64,
    mode: SampleMode,
    rng: &mut R,
) -> Result<FluxConfiguration> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(MachineError::NonPositiveInput(q));
    }
    match mode {
        SampleMode::Exact => Ok(ExactSampler::new(circuit)?.sample(q, rng)),
        SampleMode::Fast => {
            let sel = propagate_search(circuit, rng).ok_or(MachineError::NoMotion)?;
            Ok(circuit.one_hot(q, &sel))
        }
    }
}

/// Randomized backtracking over branch selections. Domains are kept
/// arc-consistent with respect to the linkage constraints.
fn propagate_search<R: Rng + ?Sized>(circuit: &MachineCircuit, rng: &mut R) -> Option<Vec<usize>> {
    let groups = circuit.quadruples.len();
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for (ci, c) in circuit.linkage.iter().enumerate() {
        touching[c.left.quadruple].push(ci);
        touching[c.right.quadruple].push(ci);
    }
    let domains: Vec<Vec<usize>> = circuit.quadruples.iter().map(|q| (0..q.branches.len()).collect()).collect();
    let mut order: Vec<usize> = (0..groups).collect();
    order.shuffle(rng);

    let domains = arc_consistent(circuit, &touching, domains, (0..groups).collect())?;
    search(circuit, &touching, &order, domains, rng)
}

fn search<R: Rng + ?Sized>(
    circuit: &MachineCircuit,
    touching: &[Vec<usize>],
    order: &[usize],
    domains: Vec<Vec<usize>>,
    rng: &mut R,
) -> Option<Vec<usize>> {
    let Some(&next) = order.iter().find(|&&g| domains[g].len() > 1) else {
        return Some(domains.iter().map(|d| d[0]).collect());
    };
    let mut choices = domains[next].clone();
    choices.shuffle(rng);
    for choice in choices {
        let mut trial = domains.clone();
        trial[next] = vec![choice];
        if let Some(d) = arc_consistent(circuit, touching, trial, vec![next]) {
            if let Some(sel) = search(circuit, touching, order, d, rng) {
                return Some(sel);
            }
        }
    }
    None
}

fn arc_consistent(
    circuit: &MachineCircuit,
    touching: &[Vec<usize>],
    mut domains: Vec<Vec<usize>>,
    seeds: Vec<usize>,
) -> Option<Vec<Vec<usize>>> {
    let mut queue: VecDeque<usize> = seeds.into();
    while let Some(g) = queue.pop_front() {
        if domains[g].is_empty() {
            return None;
        }
        for &ci in &touching[g] {
            let c = &circuit.linkage[ci];
            let (other, other_is_left) =
                if c.left.quadruple == g { (c.right.quadruple, false) } else { (c.left.quadruple, true) };
            let before = domains[other].len();
            let supporting = domains[g].clone();
            domains[other].retain(|&ob| {
                supporting.iter().any(|&gb| {
                    if other_is_left {
                        circuit.consistent(c, ob, gb)
                    } else {
                        circuit.consistent(c, gb, ob)
                    }
                })
            });
            if domains[other].is_empty() {
                return None;
            }
            if domains[other].len() != before {
                queue.push_back(other);
            }
        }
    }
    // a group may have started empty without ever being queued
    if domains.iter().any(Vec::is_empty) {
        return None;
    }
    Some(domains)
}

/// Seed of the `k`-th independent sample drawn under `master`.
///
/// SplitMix64 finalizer over `master + (k + 1) * 0x9E3779B97F4A7C15`.
pub fn split_seed(master: u64, k: u64) -> u64 {
    let mut z = master.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator used for every seeded draw in this crate.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Repeated rest-to-motion cycles of the input piston. Sample `k` uses
/// [`seeded_rng`]`(`[`split_seed`]`(master_seed, k))`.
pub fn oscillate(circuit: &MachineCircuit, steps: usize, mode: SampleMode, master_seed: u64) -> Result<Vec<Assignment>> {
    let exact = match mode {
        SampleMode::Exact => Some(ExactSampler::new(circuit)?),
        SampleMode::Fast => None,
    };
    (0..steps as u64)
        .map(|k| {
            let mut rng = seeded_rng(split_seed(master_seed, k));
            let cfg = match &exact {
                Some(s) => s.sample(1.0, &mut rng),
                None => sample_transition(circuit, 1.0, SampleMode::Fast, &mut rng)?,
            };
            configuration_to_assignment(circuit, &cfg)
        })
        .collect()
}
