//! Causal policies and the forward simulator that runs them.
//!
//! A policy sees the current buffer state, the running statistics of the
//! history through the current slot and, optionally, the scenario model. It
//! never sees the future of the trace: [`simulate_policy`] only hands it
//! values already observed. All online policies use the logarithmic rate.

mod baselines;
mod dp;
mod heuristic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::buffer::{apply_slot, clamp_power, max_feasible_power, BufferState, Schedule, SlotDecision};
use crate::error::{invalid, Error, Result};
use crate::offline::{solve_offline, SolverOptions};
use crate::processes::ScenarioModel;
use crate::rate::RateModel;
use crate::rng::RngStream;
use crate::trace::Trace;

pub use baselines::{mean_offline_decide, power_halving_decide, MeanOfflinePolicy, PowerHalvingPolicy, ReplayPolicy, ZeroPolicy};
pub use dp::{dp_solve, DpConfig, DpModel, DpPolicy};
pub use heuristic::{heuristic_decide, HeuristicOutcome, HeuristicPolicy};

/// Observed history through the current slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    harvest_sum: f64,
    arrival_sum: f64,
    last_harvest: f64,
    last_arrival: f64,
    gains: Vec<f64>,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, harvest: f64, arrival: f64, gain: f64) {
        self.harvest_sum += harvest;
        self.arrival_sum += arrival;
        self.last_harvest = harvest;
        self.last_arrival = arrival;
        self.gains.push(gain);
    }

    /// Statistics of `trace` slots `0..=slot`.
    pub fn from_history(trace: &Trace, slot: usize) -> Self {
        let mut s = RunningStats::new();
        for n in 0..=slot {
            s.observe(trace.harvests()[n], trace.arrivals()[n], trace.gains()[n]);
        }
        s
    }

    pub fn count(&self) -> usize {
        self.gains.len()
    }

    pub fn mean_harvest(&self) -> f64 {
        self.harvest_sum / self.count().max(1) as f64
    }

    pub fn mean_arrival(&self) -> f64 {
        self.arrival_sum / self.count().max(1) as f64
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// `(H_n, B_n, γ_n)` of the current slot.
    pub fn current(&self) -> Option<(f64, f64, f64)> {
        self.gains
            .last()
            .map(|&g| (self.last_harvest, self.last_arrival, g))
    }
}

pub struct PolicyContext<'a> {
    pub state: BufferState,
    pub horizon: usize,
    pub stats: &'a RunningStats,
    pub model: Option<&'a ScenarioModel>,
    /// Randomness private to this slot.
    pub rng: RngStream,
}

impl PolicyContext<'_> {
    pub fn slot(&self) -> usize {
        self.state.slot
    }

    /// Slots after the current one.
    pub fn remaining(&self) -> usize {
        self.horizon - 1 - self.state.slot
    }

    pub fn is_last(&self) -> bool {
        self.state.slot + 1 >= self.horizon
    }
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDiagnostic {
    pub slot: usize,
    pub energy: f64,
    pub data: f64,
    pub gain: f64,
    pub water: f64,
    pub power: f64,
    pub rate: f64,
    /// The policy asked for more than the buffers held.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub schedule: Schedule,
    pub diagnostics: Vec<SlotDiagnostic>,
}

/// Largest feasible decision at `state`.
pub(crate) fn spend_all(state: &BufferState) -> SlotDecision {
    clamp_power(&RateModel::Logarithmic, state, f64::INFINITY)
}

/// Run `policy` over `trace`, clamping every decision to the buffers.
pub fn simulate_policy(
    policy: &dyn Policy,
    trace: &Trace,
    e_1: f64,
    b_1: f64,
    model: Option<&ScenarioModel>,
    stream: RngStream,
) -> Result<Simulation> {
    let rate = RateModel::Logarithmic;
    let n = trace.n_slots();
    let mut state = BufferState::initial(trace, e_1, b_1)?;
    let mut stats = RunningStats::new();
    let mut decisions = Vec::with_capacity(n);
    let mut diagnostics = Vec::with_capacity(n);
    for slot in 0..n {
        stats.observe(trace.harvests()[slot], trace.arrivals()[slot], trace.gains()[slot]);
        let ctx = PolicyContext {
            state,
            horizon: n,
            stats: &stats,
            model,
            rng: stream.derive(slot as u64),
        };
        let wanted = policy.decide(&ctx)?;
        let p_max = max_feasible_power(&rate, &state);
        let clamped = !(wanted.power >= 0.0 && wanted.power <= p_max);
        let d = if clamped {
            clamp_power(&rate, &state, wanted.power)
        } else {
            SlotDecision {
                rate: wanted.rate.min(state.data),
                ..wanted
            }
        };
        diagnostics.push(SlotDiagnostic {
            slot,
            energy: state.energy,
            data: state.data,
            gain: state.gain,
            water: d.water,
            power: d.power,
            rate: d.rate,
            clamped,
        });
        decisions.push(d);
        if slot + 1 < n {
            state = apply_slot(
                &state,
                &d,
                trace.harvests()[slot + 1],
                trace.arrivals()[slot + 1],
                trace.gains()[slot + 1],
            )?;
        }
    }
    Ok(Simulation {
        schedule: Schedule::new(decisions),
        diagnostics,
    })
}

/// A policy as named in experiment configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// The clairvoyant optimum, solved per trace.
    Offline,
    Heuristic,
    PowerHalving,
    MeanOffline {
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Zero,
    Dp {
        #[serde(default)]
        config: DpConfig,
    },
}

fn default_samples() -> usize {
    32
}

pub const POLICY_NAMES: [&str; 6] = ["offline", "heuristic", "power_halving", "mean_offline", "zero", "dp"];

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Offline => "offline",
            PolicySpec::Heuristic => "heuristic",
            PolicySpec::PowerHalving => "power_halving",
            PolicySpec::MeanOffline { .. } => "mean_offline",
            PolicySpec::Zero => "zero",
            PolicySpec::Dp { .. } => "dp",
        }
    }

    /// Parse a bare policy name with default parameters.
    pub fn from_name(name: &str) -> Result<PolicySpec> {
        Ok(match name {
            "offline" => PolicySpec::Offline,
            "heuristic" => PolicySpec::Heuristic,
            "power_halving" => PolicySpec::PowerHalving,
            "mean_offline" => PolicySpec::MeanOffline {
                samples: default_samples(),
            },
            "zero" => PolicySpec::Zero,
            "dp" => PolicySpec::Dp {
                config: DpConfig::default(),
            },
            _ => {
                return Err(invalid(format!(
                    "unknown policy '{name}', expected one of: {}",
                    POLICY_NAMES.join(", ")
                )))
            }
        })
    }
}

/// A policy ready to run on traces of one scenario.
pub enum PolicyRunner {
    Offline(SolverOptions),
    Online(Box<dyn Policy>),
}

impl PolicyRunner {
    /// Builds any precomputed state (the dynamic-programming table) once.
    pub fn build(spec: &PolicySpec, model: Option<&ScenarioModel>) -> Result<PolicyRunner> {
        let opts = SolverOptions::default();
        Ok(match spec {
            PolicySpec::Offline => PolicyRunner::Offline(opts),
            PolicySpec::Heuristic => PolicyRunner::Online(Box::new(HeuristicPolicy { opts })),
            PolicySpec::PowerHalving => PolicyRunner::Online(Box::new(PowerHalvingPolicy)),
            PolicySpec::Zero => PolicyRunner::Online(Box::new(ZeroPolicy)),
            PolicySpec::MeanOffline { samples } => {
                if model.is_none() {
                    return Err(Error::UnsupportedPolicy("mean_offline".into()));
                }
                PolicyRunner::Online(Box::new(MeanOfflinePolicy::new(*samples, opts)?))
            }
            PolicySpec::Dp { config } => {
                let model = model.ok_or_else(|| Error::UnsupportedPolicy("dp".into()))?;
                PolicyRunner::Online(Box::new(DpPolicy::new(Arc::new(dp_solve(model, config)?))))
            }
        })
    }

    pub fn run(
        &self,
        trace: &Trace,
        e_1: f64,
        b_1: f64,
        model: Option<&ScenarioModel>,
        stream: RngStream,
    ) -> Result<Schedule> {
        match self {
            PolicyRunner::Offline(opts) => {
                solve_offline(trace, e_1, b_1, &RateModel::Logarithmic, opts)
            }
            PolicyRunner::Online(p) => {
                simulate_policy(p.as_ref(), trace, e_1, b_1, model, stream).map(|s| s.schedule)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_stats_means() {
        let t = Trace::new(vec![1.0, 3.0, 5.0], vec![0.0, 2.0, 4.0], vec![1.0, 2.0, 3.0]).unwrap();
        let s = RunningStats::from_history(&t, 1);
        assert_eq!(s.count(), 2);
        assert_eq!(s.mean_harvest(), 2.0);
        assert_eq!(s.mean_arrival(), 1.0);
        assert_eq!(s.gains(), &[1.0, 2.0]);
        assert_eq!(s.current(), Some((3.0, 2.0, 2.0)));
    }

    #[test]
    fn policy_names_round_trip() {
        for name in POLICY_NAMES {
            assert_eq!(PolicySpec::from_name(name).unwrap().name(), name);
        }
        let err = PolicySpec::from_name("greedy").unwrap_err().to_string();
        assert!(err.contains("power_halving"));
    }

    #[test]
    fn zero_policy_accumulates() {
        let t = Trace::constant(4, 1.0, 2.0, 1.0).unwrap();
        let sim = simulate_policy(&ZeroPolicy, &t, 0.0, 0.0, None, RngStream::new(0, 0)).unwrap();
        assert_eq!(sim.schedule.total_throughput, 0.0);
        let last = sim.diagnostics.last().unwrap();
        assert_eq!(last.energy, 4.0);
        assert_eq!(last.data, 8.0);
    }

    #[test]
    fn replayed_offline_matches() {
        let t = Trace::new(vec![2.0, 0.0, 3.0], vec![1.0, 1.0, 1.0], vec![1.0, 4.0, 0.5]).unwrap();
        let m = RateModel::Logarithmic;
        let off = solve_offline(&t, 1.0, 0.5, &m, &SolverOptions::default()).unwrap();
        let replay = ReplayPolicy::new(off.decisions.clone());
        let sim = simulate_policy(&replay, &t, 1.0, 0.5, None, RngStream::new(0, 0)).unwrap();
        assert!((sim.schedule.total_throughput - off.total_throughput).abs() < 1e-12);
    }
}
