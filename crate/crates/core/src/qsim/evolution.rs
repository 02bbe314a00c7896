//! Forward and backward evolutions.
//!
//! Measuring at the end of a unitary sequence `U` selects the backward
//! evolution: the same `U` run from the preparation `U^dagger P U |prep>`
//! (normalized), which ends exactly in the post-measurement state.

use serde::Serialize;

use super::state::bit_string;
use super::{GateSequence, Projector, QsimError, Result, StateVector};

/// `U^dagger normalize(P U |prep>)`.
pub fn backward_preparation(gates: &GateSequence, prep: &StateVector, projector: &Projector) -> Result<StateVector> {
    let evolved = prep.apply(gates)?;
    let collapsed = evolved.project_normalized(projector)?;
    collapsed.apply(&gates.inverse())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStep {
    /// 0 is the preparation; step `t` follows the `t`-th gate.
    pub step: usize,
    pub gate: String,
    /// Per register, in layout order.
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationTrajectory {
    pub registers: Vec<String>,
    pub measured_qubits: Vec<usize>,
    pub outcome: String,
    pub steps: Vec<TrajectoryStep>,
    /// Register populations of the state after measurement.
    pub post_measurement: Vec<Vec<f64>>,
}

impl PopulationTrajectory {
    /// Largest forward/backward population gap over all steps and registers.
    pub fn max_switch(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.forward.iter().flatten().zip(s.backward.iter().flatten()))
            .map(|(f, b)| (f - b).abs())
            .fold(0.0, f64::max)
    }
}

fn register_populations(state: &StateVector) -> Result<Vec<Vec<f64>>> {
    state
        .layout()
        .registers()
        .iter()
        .map(|r| state.marginal_probabilities(&r.qubits()))
        .collect()
}

/// Register populations along the forward evolution from `prep` and the
/// backward evolution selected by `projector`, after every gate.
pub fn trajectory_populations(gates: &GateSequence, prep: &StateVector, projector: &Projector) -> Result<PopulationTrajectory> {
    let back_prep = backward_preparation(gates, prep, projector)?;
    let mut fwd = prep.clone();
    let mut bwd = back_prep;
    let mut steps = vec![TrajectoryStep {
        step: 0,
        gate: "prep".into(),
        forward: register_populations(&fwd)?,
        backward: register_populations(&bwd)?,
    }];
    for (t, g) in gates.gates().iter().enumerate() {
        fwd.apply_gate_mut(g);
        bwd.apply_gate_mut(g);
        steps.push(TrajectoryStep {
            step: t + 1,
            gate: g.to_string(),
            forward: register_populations(&fwd)?,
            backward: register_populations(&bwd)?,
        });
    }
    let post = fwd.project_normalized(projector)?;
    Ok(PopulationTrajectory {
        registers: prep.layout().registers().iter().map(|r| r.name.clone()).collect(),
        measured_qubits: projector.qubits.clone(),
        outcome: bit_string(projector.value, projector.qubits.len()),
        steps,
        post_measurement: register_populations(&post)?,
    })
}

/// Exact joint distribution of `first ++ second` measured after `gates`.
pub fn joint_distribution_measured_last(
    prep: &StateVector,
    gates: &GateSequence,
    first: &[usize],
    second: &[usize],
) -> Result<Vec<f64>> {
    let all: Vec<usize> = first.iter().chain(second).copied().collect();
    prep.apply(gates)?.marginal_probabilities(&all)
}

/// Exact joint distribution when `first` is measured on `prep`, before the
/// gates, and `second` after. Gates may touch `first` only as controls.
pub fn joint_distribution_measured_first(
    prep: &StateVector,
    gates: &GateSequence,
    first: &[usize],
    second: &[usize],
) -> Result<Vec<f64>> {
    if let Some(g) = gates.first_targeting(first) {
        return Err(QsimError::TargetsMeasured(g.to_string()));
    }
    let pre = prep.marginal_probabilities(first)?;
    let w2 = second.len();
    let mut joint = vec![0.0; pre.len() << w2];
    for (a, &pa) in pre.iter().enumerate() {
        if pa <= 0.0 {
            continue;
        }
        let collapsed = prep.project_normalized(&Projector::new(first.to_vec(), a as u64))?;
        let cond = collapsed.apply(gates)?.marginal_probabilities(second)?;
        for (b, pb) in cond.iter().enumerate() {
            joint[(a << w2) | b] = pa * pb;
        }
    }
    Ok(joint)
}
