//! Exact check that a policy's efficiency is at least its smallest immediate
//! fill, by enumerating every exogenous path of a small scenario.
//!
//! Expectations are exact sums over paths, so there is no sampling error. The
//! fill at a reachable state is computed from the paths that share the
//! history up to that slot; for Markov exogenous processes that conditional
//! law depends on the history only through the current joint state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::buffer::BufferState;
use crate::error::{Error, Result};
use crate::offline::{solve_offline, SolverOptions};
use crate::online::{simulate_policy, Policy};
use crate::processes::{JointState, ScenarioModel};
use crate::rate::RateModel;
use crate::rng::RngStream;
use crate::trace::Trace;

use super::fill::realised_loss;

/// Default limit on enumerated exogenous paths.
pub const ENUMERATION_PATH_CAP: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillBoundReport {
    pub efficiency: f64,
    pub min_fill: f64,
    pub holds: bool,
    /// Reachable (state, history) pairs visited.
    pub states: usize,
    pub paths: usize,
}

fn enumerate_paths(model: &ScenarioModel) -> Result<Vec<(Vec<JointState>, f64)>> {
    let chains = model.chains()?;
    let joint = chains.joint_states();
    let mut paths: Vec<(Vec<JointState>, f64)> = joint
        .iter()
        .map(|&s| (vec![s], chains.initial_prob(s)))
        .filter(|(_, p)| *p > 0.0)
        .collect();
    for _ in 1..model.horizon {
        let mut next = Vec::with_capacity(paths.len() * joint.len());
        for (path, p) in &paths {
            let last = *path.last().expect("paths are non-empty");
            for &s in &joint {
                let q = chains.transition_prob(last, s);
                if q > 0.0 {
                    let mut extended = path.clone();
                    extended.push(s);
                    next.push((extended, p * q));
                }
            }
        }
        paths = next;
    }
    Ok(paths)
}

#[derive(Default)]
struct Node {
    prob: f64,
    weighted_loss: f64,
    gain: f64,
}

/// Exact efficiency and minimum immediate fill of `policy` on `model`.
/// Refuses scenarios with more than `cap` exogenous paths.
pub fn verify_fill_bound(model: &ScenarioModel, policy: &dyn Policy, cap: usize) -> Result<FillBoundReport> {
    let chains = model.chains()?;
    let per_slot = chains.joint_states().len();
    let bound = (0..model.horizon).try_fold(1usize, |acc, _| acc.checked_mul(per_slot));
    match bound {
        Some(b) if b <= cap => {}
        _ => {
            return Err(Error::ResourceCap {
                what: "exogenous paths",
                requested: bound.unwrap_or(usize::MAX),
                cap,
            })
        }
    }
    let paths = enumerate_paths(model)?;
    let opts = SolverOptions::default();
    let (e_1, b_1) = (model.e_1(), model.b_1());
    let mut nodes: BTreeMap<Vec<JointState>, Node> = BTreeMap::new();
    let (mut online, mut offline) = (0.0, 0.0);

    for (path, prob) in &paths {
        let values: Vec<(f64, f64, f64)> = path.iter().map(|&s| chains.value(s)).collect();
        let trace = Trace::new(
            values.iter().map(|v| v.0).collect(),
            values.iter().map(|v| v.1).collect(),
            values.iter().map(|v| v.2).collect(),
        )?;
        let sim = simulate_policy(policy, &trace, e_1, b_1, Some(model), RngStream::new(0, 0))?;
        online += prob * sim.schedule.total_throughput;
        offline += prob * solve_offline(&trace, e_1, b_1, &RateModel::Logarithmic, &opts)?.total_throughput;
        for (m, d) in sim.diagnostics.iter().enumerate() {
            let state = BufferState::new(d.energy, d.data, d.gain, m)?;
            let decision = sim.schedule.decisions[m];
            let loss = realised_loss(&trace, &state, &decision, &opts)?;
            let node = nodes.entry(path[..=m].to_vec()).or_default();
            node.prob += prob;
            node.weighted_loss += prob * loss;
            node.gain = decision.rate;
        }
    }
    if offline <= 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    let min_fill = nodes
        .values()
        .map(|n| {
            let loss = (n.weighted_loss / n.prob).max(0.0);
            if n.gain + loss <= 0.0 {
                1.0
            } else {
                n.gain / (n.gain + loss)
            }
        })
        .fold(1.0, f64::min);
    let efficiency = online / offline;
    Ok(FillBoundReport {
        efficiency,
        min_fill,
        holds: efficiency >= min_fill - 1e-9,
        states: nodes.len(),
        paths: paths.len(),
    })
}
