//! Backward induction on a discretised buffer grid.
//!
//! Energy and data are held on uniform grids `0, δ, 2δ, …`; post-decision
//! buffers snap down to the grid so the induced policy never spends what it
//! does not hold. The exogenous state is the joint state of the scenario's
//! chains. `V[n][ie][ib][s]` is the best expected throughput from slot `n`
//! with buffers `(ie·δe, ib·δb)` after slot `n`'s arrivals, in joint state `s`.
//!
//! Candidate powers at a state: every energy grid multiple, every power that
//! sends a data grid multiple, the full budget, and `Q_w` powers from water
//! levels spaced geometrically between the threshold and the top of the
//! energy grid. None of these depend on the state except through the budget
//! cap, so the candidate set grows with the buffers and `V` is monotone.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{clamp_power, BufferState, SlotDecision};
use crate::error::{invalid, Error, Result};
use crate::processes::{JointState, ScenarioChains, ScenarioModel};
use crate::rate::RateModel;

use super::{spend_all, Policy, PolicyContext};

const SNAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpConfig {
    pub energy_levels: usize,
    pub energy_step: f64,
    /// Ignored when the data backlog is unlimited.
    pub data_levels: usize,
    pub data_step: f64,
    pub water_levels: usize,
    /// Refuse tables with more value entries than this.
    pub max_entries: usize,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            energy_levels: 32,
            energy_step: 1.0,
            data_levels: 32,
            data_step: 1.0,
            water_levels: 16,
            max_entries: 10_000_000,
        }
    }
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.energy_levels < 2 || self.data_levels < 2 || self.water_levels < 2 {
            return Err(invalid("dp grids need at least two levels"));
        }
        for (name, v) in [("energy_step", self.energy_step), ("data_step", self.data_step)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("dp {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DpModel {
    pub config: DpConfig,
    pub horizon: usize,
    pub scenario: ScenarioModel,
    chains: ScenarioChains,
    joint: Vec<JointState>,
    /// `succ[s]` lists `(s', P(s → s'))` with positive probability.
    succ: Vec<Vec<(usize, f64)>>,
    data_levels: usize,
    values: Vec<f64>,
    greedy: Vec<f64>,
}

impl DpModel {
    fn unlimited_data(&self) -> bool {
        self.data_levels == 1
    }

    fn index(&self, n: usize, ie: usize, ib: usize, s: usize) -> usize {
        ((n * self.config.energy_levels + ie) * self.data_levels + ib) * self.joint.len() + s
    }

    fn snap_energy(&self, e: f64) -> usize {
        (((e + SNAP_EPS) / self.config.energy_step).floor().max(0.0) as usize).min(self.config.energy_levels - 1)
    }

    fn snap_data(&self, b: f64) -> usize {
        if self.unlimited_data() {
            return 0;
        }
        (((b + SNAP_EPS) / self.config.data_step).floor().max(0.0) as usize).min(self.data_levels - 1)
    }

    fn energy_at(&self, ie: usize) -> f64 {
        ie as f64 * self.config.energy_step
    }

    fn data_at(&self, ib: usize) -> f64 {
        if self.unlimited_data() {
            f64::INFINITY
        } else {
            ib as f64 * self.config.data_step
        }
    }

    pub fn n_exogenous(&self) -> usize {
        self.joint.len()
    }

    pub fn exogenous_index(&self, s: JointState) -> Option<usize> {
        self.joint.iter().position(|&j| j == s)
    }

    /// Value at the grid point below `(energy, data)`, slot `n`, joint state `s`.
    pub fn value(&self, n: usize, energy: f64, data: f64, s: usize) -> f64 {
        self.values[self.index(n, self.snap_energy(energy), self.snap_data(data), s)]
    }

    /// Value at grid indices.
    pub fn value_at(&self, n: usize, ie: usize, ib: usize, s: usize) -> f64 {
        self.values[self.index(n, ie, ib, s)]
    }

    /// Greedy power at grid indices.
    pub fn greedy_power(&self, n: usize, ie: usize, ib: usize, s: usize) -> f64 {
        self.greedy[self.index(n, ie, ib, s)]
    }

    pub fn energy_levels(&self) -> usize {
        self.config.energy_levels
    }

    pub fn data_levels(&self) -> usize {
        self.data_levels
    }

    /// Expected optimal throughput over the scenario's initial law.
    pub fn expected_value(&self) -> f64 {
        let (e_1, b_1) = (self.scenario.e_1(), self.scenario.b_1());
        self.joint
            .iter()
            .enumerate()
            .map(|(s, &j)| {
                let (h, b, _) = self.chains.value(j);
                self.chains.initial_prob(j) * self.value(0, e_1 + h, b_1 + b, s)
            })
            .sum()
    }

    /// Grid-resolution slack: snapping costs at most one energy step of
    /// marginal rate and one data step per slot.
    pub fn resolution_slack(&self) -> f64 {
        let g_max = self
            .joint
            .iter()
            .map(|&j| self.chains.value(j).2)
            .fold(0.0, f64::max);
        let n = self.horizon as f64;
        let data = if self.unlimited_data() { 0.0 } else { n * self.config.data_step };
        n * RateModel::Logarithmic.marginal_rate_at_zero(g_max) * self.config.energy_step + data
    }

    fn candidates(&self, energy: f64, data: f64, gain: f64, out: &mut Vec<f64>) {
        let m = RateModel::Logarithmic;
        out.clear();
        let p_max = energy.min(m.power_for_rate(data, gain));
        out.push(p_max);
        let de = self.config.energy_step;
        for j in 0..self.config.energy_levels {
            let p = j as f64 * de;
            if p > p_max {
                break;
            }
            out.push(p);
            // Lands the post-decision energy on the grid.
            let q = energy - p;
            if q >= 0.0 && q <= p_max {
                out.push(q);
            }
        }
        if data.is_finite() {
            for k in 0..self.data_levels {
                let p = m.power_for_rate(k as f64 * self.config.data_step, gain);
                if p > p_max {
                    break;
                }
                out.push(p);
                let q = m.power_for_rate(data - k as f64 * self.config.data_step, gain);
                if q >= 0.0 && q <= p_max {
                    out.push(q);
                }
            }
        }
        let floor = 1.0 / gain;
        let top = self.energy_at(self.config.energy_levels - 1) + floor;
        let q_w = self.config.water_levels;
        for i in 1..q_w {
            let w = floor * (top / floor).powf(i as f64 / (q_w - 1) as f64);
            let p = w - floor;
            if p <= p_max {
                out.push(p);
            }
        }
    }

    /// Best power and its value at a continuous state, looking up `V[n+1]`.
    fn best_action(&self, n: usize, energy: f64, data: f64, s: usize, scratch: &mut Vec<f64>) -> (f64, f64) {
        let m = RateModel::Logarithmic;
        let gain = self.chains.value(self.joint[s]).2;
        self.candidates(energy, data, gain, scratch);
        let last = n + 1 >= self.horizon;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &p in scratch.iter() {
            let r = m.rate_from_power(p, gain).min(data);
            let mut v = r;
            if !last {
                for &(t, prob) in &self.succ[s] {
                    let (h, b, _) = self.chains.value(self.joint[t]);
                    v += prob * self.value(n + 1, energy - p + h, data - r + b, t);
                }
            }
            if v > best.0 {
                best = (v, p);
            }
        }
        best
    }
}

/// Solve the discretised dynamic program for `model`.
pub fn dp_solve(model: &ScenarioModel, config: &DpConfig) -> Result<DpModel> {
    config.validate()?;
    let chains = model.chains()?;
    let joint = chains.joint_states();
    let succ: Vec<Vec<(usize, f64)>> = joint
        .iter()
        .map(|&a| {
            joint
                .iter()
                .enumerate()
                .filter_map(|(t, &b)| {
                    let p = chains.transition_prob(a, b);
                    (p > 0.0).then_some((t, p))
                })
                .collect()
        })
        .collect();
    let data_levels = if model.b_1().is_infinite() { 1 } else { config.data_levels };
    let per_slot = config.energy_levels * data_levels * joint.len();
    let entries = per_slot.saturating_mul(model.horizon);
    if entries > config.max_entries {
        return Err(Error::ResourceCap {
            what: "dp value table entries",
            requested: entries,
            cap: config.max_entries,
        });
    }
    let mut dp = DpModel {
        config: *config,
        horizon: model.horizon,
        scenario: model.clone(),
        chains,
        joint,
        succ,
        data_levels,
        values: vec![0.0; entries],
        greedy: vec![0.0; entries],
    };
    for n in (0..model.horizon).rev() {
        let slot: Vec<(f64, f64)> = (0..per_slot)
            .into_par_iter()
            .map_init(Vec::new, |scratch, k| {
                let s = k % dp.joint.len();
                let ib = (k / dp.joint.len()) % data_levels;
                let ie = k / (dp.joint.len() * data_levels);
                dp.best_action(n, dp.energy_at(ie), dp.data_at(ib), s, scratch)
            })
            .collect();
        let base = dp.index(n, 0, 0, 0);
        for (k, (v, p)) in slot.into_iter().enumerate() {
            dp.values[base + k] = v;
            dp.greedy[base + k] = p;
        }
    }
    Ok(dp)
}

/// Acts by one-step lookahead against the solved value table at the true
/// (continuous) buffer state.
#[derive(Debug, Clone)]
pub struct DpPolicy {
    model: Arc<DpModel>,
}

impl DpPolicy {
    pub fn new(model: Arc<DpModel>) -> Self {
        DpPolicy { model }
    }

    pub fn model(&self) -> &DpModel {
        &self.model
    }
}

impl Policy for DpPolicy {
    fn name(&self) -> String {
        "dp".into()
    }

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision> {
        let dp = &self.model;
        if ctx.horizon != dp.horizon {
            return Err(invalid(format!(
                "dp table solved for horizon {} but the trace has {}",
                dp.horizon, ctx.horizon
            )));
        }
        if ctx.is_last() {
            return Ok(spend_all(&ctx.state));
        }
        let (h, b, g) = ctx
            .stats
            .current()
            .ok_or_else(|| invalid("no observation for the current slot"))?;
        let joint = dp
            .scenario
            .infer_state(h, b, g)
            .and_then(|j| dp.exogenous_index(j))
            .ok_or_else(|| invalid(format!("observation ({h}, {b}, {g}) not emitted by the scenario")))?;
        let s: BufferState = ctx.state;
        let (_, p) = dp.best_action(s.slot, s.energy, s.data, joint, &mut Vec::new());
        Ok(clamp_power(&RateModel::Logarithmic, &s, p))
    }
}
