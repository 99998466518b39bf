//! Buffer dynamics, per-slot decisions and schedule feasibility.
//!
//! Slot indices are zero-based throughout the library. A buffer state at slot
//! `n` already contains that slot's harvest and arrival; after the decision the
//! next slot's arrivals are added:
//!
//! ```text
//! e' = e + H_{n+1} − ρ_n        b' = b + B_{n+1} − r_n
//! ```
//!
//! The data buffer may be unbounded (`f64::INFINITY`), which models a
//! transmitter that always has data to send.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rate::RateModel;
use crate::trace::Trace;

/// Absolute slack, in energy units or bits, allowed on every causality check.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferState {
    pub energy: f64,
    pub data: f64,
    pub gain: f64,
    /// Zero-based slot index.
    pub slot: usize,
}

impl BufferState {
    pub fn new(energy: f64, data: f64, gain: f64, slot: usize) -> Result<Self> {
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(invalid(format!("energy must be finite and ≥ 0, got {energy}")));
        }
        if data.is_nan() || data < 0.0 {
            return Err(invalid(format!("data must be ≥ 0, got {data}")));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(invalid(format!("gain must be positive, got {gain}")));
        }
        Ok(BufferState {
            energy,
            data,
            gain,
            slot,
        })
    }

    /// State at the first slot: initial contents plus the first slot's
    /// harvest and arrival.
    pub fn initial(trace: &Trace, e_1: f64, b_1: f64) -> Result<Self> {
        BufferState::new(
            e_1 + trace.harvests()[0],
            b_1 + trace.arrivals()[0],
            trace.gains()[0],
            0,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub water: f64,
    pub power: f64,
    pub rate: f64,
}

impl SlotDecision {
    pub fn from_water(model: &RateModel, water: f64, gain: f64) -> Result<Self> {
        let power = model.power_from_water(water, gain)?;
        let rate = model.rate_from_power(power, gain);
        Ok(SlotDecision { water, power, rate })
    }

    pub fn from_power(model: &RateModel, power: f64, gain: f64) -> Result<Self> {
        let water = model.water_from_power(power, gain)?;
        let rate = model.rate_from_power(power, gain);
        Ok(SlotDecision { water, power, rate })
    }

    pub fn idle(model: &RateModel, gain: f64) -> Self {
        SlotDecision {
            water: model.threshold(gain),
            power: 0.0,
            rate: 0.0,
        }
    }
}

/// Largest power the state can support: limited by stored energy and by the
/// data the rate may carry.
pub fn max_feasible_power(model: &RateModel, state: &BufferState) -> f64 {
    state
        .energy
        .min(model.power_for_rate(state.data, state.gain))
        .max(0.0)
}

/// Reduce `power` until it is feasible in `state` and build the decision.
pub fn clamp_power(model: &RateModel, state: &BufferState, power: f64) -> SlotDecision {
    let p = if power.is_nan() {
        0.0
    } else {
        power.clamp(0.0, max_feasible_power(model, state))
    };
    let rate = model.rate_from_power(p, state.gain).min(state.data);
    SlotDecision {
        water: model.water(p, state.gain),
        power: p,
        rate,
    }
}

/// Advance the buffers by one slot.
pub fn apply_slot(
    state: &BufferState,
    decision: &SlotDecision,
    next_harvest: f64,
    next_arrival: f64,
    next_gain: f64,
) -> Result<BufferState> {
    if decision.power > state.energy + FEASIBILITY_TOL {
        return Err(Error::InfeasibleDecision {
            slot: state.slot,
            kind: ViolationKind::EnergyCausality,
            deficit: decision.power - state.energy,
        });
    }
    if decision.rate > state.data + FEASIBILITY_TOL {
        return Err(Error::InfeasibleDecision {
            slot: state.slot,
            kind: ViolationKind::DataCausality,
            deficit: decision.rate - state.data,
        });
    }
    let energy = (state.energy - decision.power).max(0.0) + next_harvest;
    let data = (state.data - decision.rate).max(0.0) + next_arrival;
    BufferState::new(energy, data, next_gain, state.slot + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub decisions: Vec<SlotDecision>,
    pub total_throughput: f64,
    pub total_energy: f64,
}

impl Schedule {
    pub fn new(decisions: Vec<SlotDecision>) -> Self {
        let total_throughput = decisions.iter().map(|d| d.rate).sum();
        let total_energy = decisions.iter().map(|d| d.power).sum();
        Schedule {
            decisions,
            total_throughput,
            total_energy,
        }
    }

    /// An idle schedule over `trace`.
    pub fn zero(model: &RateModel, trace: &Trace) -> Self {
        Schedule::new(
            trace
                .gains()
                .iter()
                .map(|&g| SlotDecision::idle(model, g))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn waters(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.water).collect()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.power).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.rate).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    EnergyCausality,
    DataCausality,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::EnergyCausality => f.write_str("energy-causality"),
            ViolationKind::DataCausality => f.write_str("data-causality"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub slot: usize,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_lengths(trace: &Trace, schedule: &Schedule) -> Result<()> {
    if trace.n_slots() != schedule.len() {
        return Err(invalid(format!(
            "schedule has {} decisions for a {}-slot trace",
            schedule.len(),
            trace.n_slots()
        )));
    }
    Ok(())
}

/// Check the cumulative causality inequalities.
///
/// For every window starting at any slot the energy spent may not exceed the
/// stored energy plus harvests inside the window, and likewise for data. All
/// windows reduce to prefix sums from the first slot, which is what is checked
/// here; every slot at which a prefix is overdrawn is reported.
pub fn check_feasibility(
    trace: &Trace,
    schedule: &Schedule,
    e_1: f64,
    b_1: f64,
) -> Result<FeasibilityReport> {
    check_lengths(trace, schedule)?;
    let mut report = FeasibilityReport::default();
    let mut energy_in = e_1;
    let mut data_in = b_1;
    let mut energy_out = 0.0;
    let mut data_out = 0.0;
    for (n, d) in schedule.decisions.iter().enumerate() {
        energy_in += trace.harvests()[n];
        data_in += trace.arrivals()[n];
        energy_out += d.power;
        data_out += d.rate;
        if energy_out - energy_in > FEASIBILITY_TOL {
            report.violations.push(Violation {
                slot: n,
                kind: ViolationKind::EnergyCausality,
                magnitude: energy_out - energy_in,
            });
        }
        if data_out - data_in > FEASIBILITY_TOL {
            report.violations.push(Violation {
                slot: n,
                kind: ViolationKind::DataCausality,
                magnitude: data_out - data_in,
            });
        }
    }
    Ok(report)
}

/// The same check by stepping the buffers forward slot by slot. Overdrawn
/// buffers are carried negative so later slots are judged consistently.
pub fn simulate_feasibility(
    trace: &Trace,
    schedule: &Schedule,
    e_1: f64,
    b_1: f64,
) -> Result<FeasibilityReport> {
    check_lengths(trace, schedule)?;
    let mut report = FeasibilityReport::default();
    let mut energy = e_1;
    let mut data = b_1;
    for (n, d) in schedule.decisions.iter().enumerate() {
        energy += trace.harvests()[n];
        data += trace.arrivals()[n];
        if d.power - energy > FEASIBILITY_TOL {
            report.violations.push(Violation {
                slot: n,
                kind: ViolationKind::EnergyCausality,
                magnitude: d.power - energy,
            });
        }
        if d.rate - data > FEASIBILITY_TOL {
            report.violations.push(Violation {
                slot: n,
                kind: ViolationKind::DataCausality,
                magnitude: d.rate - data,
            });
        }
        energy -= d.power;
        data -= d.rate;
    }
    Ok(report)
}

/// Buffer contents left after the last slot of `schedule`.
pub fn final_buffers(trace: &Trace, schedule: &Schedule, e_1: f64, b_1: f64) -> (f64, f64) {
    let energy = e_1 + trace.harvests().iter().sum::<f64>() - schedule.total_energy;
    let data = b_1 + trace.arrivals().iter().sum::<f64>() - schedule.total_throughput;
    (energy, data)
}
