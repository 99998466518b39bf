//! Throughput-maximising transmission schedules for an energy-harvesting
//! transmitter over a fading channel.
//!
//! * [`offline`] computes clairvoyant optimal schedules slot by slot.
//! * [`online`] runs causal policies against sampled traces, including a
//!   discretised dynamic program.
//! * [`analysis`] estimates fills, efficiencies and the distribution of the
//!   offline optimal power under Bernoulli harvesting.

pub mod analysis;
pub mod buffer;
pub mod error;
pub mod offline;
pub mod online;
pub mod processes;
pub mod rate;
pub mod rng;
pub mod trace;

pub use buffer::{
    apply_slot, check_feasibility, simulate_feasibility, BufferState, FeasibilityReport, Schedule,
    SlotDecision, Violation, ViolationKind, FEASIBILITY_TOL,
};
pub use error::{Error, Result};
pub use offline::{fixed_point_water, solve_offline, Binding, SolverOptions};
pub use online::{simulate_policy, Policy, PolicyContext, PolicyRunner, PolicySpec, RunningStats};
pub use processes::{dp_toy_scenario, named_scenario, preset_scenario, sample_trace, stationary_mean, Process, ScenarioModel};
pub use rate::{HalfLog2, RateFunction, RateModel, SqrtRate, LOG_WATER_SCALE};
pub use rng::RngStream;
pub use trace::Trace;
