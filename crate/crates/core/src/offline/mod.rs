//! Offline (clairvoyant) throughput-maximising schedules.
//!
//! The optimal water level of every slot is the largest fixed point of
//! `w ↦ min{w_energy(w), w_data(w)}`, evaluated with the slot's actual buffers
//! and the known future of the trace. Slots are solved in order and buffers
//! advanced with the chosen decision, which yields non-decreasing water levels.

mod bounds;
mod brute;
mod fixpoint;

use serde::{Deserialize, Serialize};

use crate::buffer::{apply_slot, clamp_power, max_feasible_power, BufferState, Schedule, SlotDecision};
use crate::error::{invalid, Error, Result};
use crate::rate::RateModel;
use crate::trace::Trace;

pub use bounds::{water_bounds, water_bounds_general, water_bounds_log, WaterBounds};
pub use brute::{brute_force_offline, grid_resolution_slack, BRUTE_FORCE_MAX_GRID, BRUTE_FORCE_MAX_SLOTS};
pub use fixpoint::FixedPointLog;

pub(crate) use fixpoint::{iterate as iterate_fixed_point, Probe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// Which constraint pins a slot's water level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    Energy,
    Data,
    /// The slot does not transmit.
    Idle,
}

impl Binding {
    pub fn as_str(&self) -> &'static str {
        match self {
            Binding::Energy => "energy",
            Binding::Data => "data",
            Binding::Idle => "idle",
        }
    }
}

/// A solved schedule with per-slot diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution {
    pub schedule: Schedule,
    /// Buffer state at each slot before its decision.
    pub states: Vec<BufferState>,
    pub bindings: Vec<Binding>,
    pub iterations: Vec<usize>,
}

/// Water level that dominates every fixed-point candidate at `state`.
pub fn seed_water(slot: usize, trace: &Trace, state: &BufferState, model: &RateModel) -> f64 {
    let future_energy: f64 = trace.harvests()[slot + 1..].iter().sum();
    let gains = std::iter::once(state.gain).chain(trace.gains()[slot + 1..].iter().copied());
    let (max_gain, max_threshold) = gains.fold((0.0_f64, 0.0_f64), |(g, t), x| {
        (g.max(x), t.max(model.threshold(x)))
    });
    let total = state.energy + future_energy;
    match model {
        RateModel::Logarithmic => total + max_threshold,
        RateModel::General(_) => model.water(total, max_gain) + max_threshold,
    }
}

fn probe(w: f64, slot: usize, trace: &Trace, state: &BufferState, model: &RateModel) -> Probe {
    let b = bounds::evaluate_natural(w, slot, trace, state, model);
    Probe::from_pieces(
        w,
        b.bound(),
        (b.energy_excess, b.energy_slope),
        (b.data_excess, b.data_slope),
    )
}

/// Largest fixed point of the slot's water-level map, starting from
/// [`seed_water`]. Iterates are non-increasing.
pub fn fixed_point_water(
    slot: usize,
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
    opts: &SolverOptions,
) -> Result<(f64, FixedPointLog)> {
    opts.validate()?;
    bounds::validate_slot(slot, trace, state)?;
    let seed = seed_water(slot, trace, state, model);
    let log = fixpoint::iterate(seed, opts.tol, opts.max_iter, |w| {
        probe(w, slot, trace, state, model)
    });
    if !log.converged {
        return Err(Error::NonConvergence {
            slot,
            iterations: log.iterations_used,
            last: log.last(),
            residual: log.gap,
        });
    }
    Ok((log.last(), log))
}

/// Decision for a slot given its optimal water level, reduced to what the
/// buffers hold if rounding pushed it over.
pub(crate) fn decide(model: &RateModel, state: &BufferState, w: f64) -> SlotDecision {
    let power = model.power(w, state.gain);
    if power == 0.0 {
        return SlotDecision {
            water: w,
            power: 0.0,
            rate: 0.0,
        };
    }
    if power > max_feasible_power(model, state) {
        return clamp_power(model, state, power);
    }
    SlotDecision {
        water: w,
        power,
        rate: model.rate_from_power(power, state.gain).min(state.data),
    }
}

fn binding_at(model: &RateModel, w: f64, slot: usize, trace: &Trace, state: &BufferState) -> Binding {
    if model.power(w, state.gain) == 0.0 {
        return Binding::Idle;
    }
    let b = bounds::evaluate_natural(w, slot, trace, state, model);
    if b.w_data < b.w_energy {
        Binding::Data
    } else {
        Binding::Energy
    }
}

/// Optimal decision for a single slot given the known continuation.
pub fn offline_decision(
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
    opts: &SolverOptions,
) -> Result<SlotDecision> {
    let (w, _) = fixed_point_water(state.slot, trace, state, model, opts)?;
    Ok(decide(model, state, w))
}

pub fn solve_offline_detailed(
    trace: &Trace,
    e_1: f64,
    b_1: f64,
    model: &RateModel,
    opts: &SolverOptions,
) -> Result<OfflineSolution> {
    let n = trace.n_slots();
    let mut state = BufferState::initial(trace, e_1, b_1)?;
    let mut decisions = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    let mut bindings = Vec::with_capacity(n);
    let mut iterations = Vec::with_capacity(n);
    for slot in 0..n {
        let (w, log) = fixed_point_water(slot, trace, &state, model, opts)?;
        let d = decide(model, &state, w);
        bindings.push(if d.power == 0.0 {
            Binding::Idle
        } else {
            binding_at(model, w, slot, trace, &state)
        });
        iterations.push(log.iterations_used);
        states.push(state);
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
    Ok(OfflineSolution {
        schedule: Schedule::new(decisions),
        states,
        bindings,
        iterations,
    })
}

pub fn solve_offline(
    trace: &Trace,
    e_1: f64,
    b_1: f64,
    model: &RateModel,
    opts: &SolverOptions,
) -> Result<Schedule> {
    solve_offline_detailed(trace, e_1, b_1, model, opts).map(|s| s.schedule)
}

/// Total offline throughput from `state` onward, where `trace` supplies the
/// continuation (`trace` slot `state.slot` is the current slot).
pub fn offline_value_from(
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
    opts: &SolverOptions,
) -> Result<f64> {
    let n = trace.n_slots();
    let mut state = *state;
    let mut total = 0.0;
    for slot in state.slot..n {
        let (w, _) = fixed_point_water(slot, trace, &state, model, opts)?;
        let d = decide(model, &state, w);
        total += d.rate;
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
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::check_feasibility;
    use crate::rate::{HalfLog2, SqrtRate, LOG_WATER_SCALE};

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn single_slot_closed_forms() {
        let m = RateModel::Logarithmic;
        let trace = Trace::constant(1, 0.0, 0.0, 1.0).unwrap();
        let s = BufferState::new(5.0, f64::INFINITY, 1.0, 0).unwrap();
        let (w, _) = fixed_point_water(0, &trace, &s, &m, &opts()).unwrap();
        assert!((w - 6.0).abs() < 1e-9);
        let s = BufferState::new(1e6, 1.0, 1.0, 0).unwrap();
        let (w, _) = fixed_point_water(0, &trace, &s, &m, &opts()).unwrap();
        assert!((w - 4.0).abs() < 1e-9);
    }

    #[test]
    fn min_ratio_example() {
        // e = 3, later harvests (0, 3): power min{3/1, 3/2, 6/3} = 1.5.
        let m = RateModel::Logarithmic;
        let trace = Trace::new(vec![0.0, 0.0, 3.0], vec![0.0; 3], vec![1.0; 3]).unwrap();
        let s = BufferState::new(3.0, f64::INFINITY, 1.0, 0).unwrap();
        let (w, log) = fixed_point_water(0, &trace, &s, &m, &opts()).unwrap();
        assert!((w - 2.5).abs() < 1e-9);
        assert!(log.converged);
        for pair in log.iterates.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn front_loaded_energy_spreads_evenly() {
        let m = RateModel::Logarithmic;
        let trace = Trace::constant(5, 0.0, 0.0, 1.0).unwrap();
        let s = solve_offline(&trace, 10.0, f64::INFINITY, &m, &opts()).unwrap();
        for d in &s.decisions {
            assert!((d.power - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_energy_slot_stays_below_later_levels() {
        // Empty buffer now, a strong channel next with no further energy: the
        // fixed point sits below both thresholds.
        let m = RateModel::Logarithmic;
        let trace = Trace::new(vec![0.0, 0.0], vec![0.0; 2], vec![1.0, 10.0]).unwrap();
        let sol = solve_offline_detailed(&trace, 0.0, f64::INFINITY, &m, &opts()).unwrap();
        let w = sol.schedule.waters();
        assert!(w[0] <= w[1] + 1e-9);
        assert_eq!(sol.schedule.total_throughput, 0.0);
        assert_eq!(sol.bindings, vec![Binding::Idle, Binding::Idle]);
    }

    #[test]
    fn data_binding_is_reported() {
        let m = RateModel::Logarithmic;
        let trace = Trace::constant(3, 5.0, 0.5, 1.0).unwrap();
        let sol = solve_offline_detailed(&trace, 10.0, 0.0, &m, &opts()).unwrap();
        assert!(sol.bindings.iter().all(|&b| b == Binding::Data));
        let report = check_feasibility(&trace, &sol.schedule, 10.0, 0.0).unwrap();
        assert!(report.feasible());
        assert!((sol.schedule.total_throughput - 1.5).abs() < 1e-9);
    }

    #[test]
    fn general_mode_matches_log_mode() {
        let trace = Trace::new(
            vec![1.0, 0.0, 4.0, 0.0],
            vec![1.0, 2.0, 0.0, 1.0],
            vec![0.5, 2.0, 1.0, 3.0],
        )
        .unwrap();
        let log = solve_offline(&trace, 2.0, 1.0, &RateModel::Logarithmic, &opts()).unwrap();
        let gen = solve_offline(&trace, 2.0, 1.0, &RateModel::general(HalfLog2), &opts()).unwrap();
        for (a, b) in log.decisions.iter().zip(&gen.decisions) {
            assert!((a.water - b.water / LOG_WATER_SCALE).abs() < 1e-6);
            assert!((a.power - b.power).abs() < 1e-6);
        }
    }

    #[test]
    fn sqrt_rate_solves() {
        let m = RateModel::general(SqrtRate);
        let trace = Trace::new(vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0], vec![1.0, 0.5, 2.0]).unwrap();
        let sol = solve_offline(&trace, 3.0, f64::INFINITY, &m, &opts()).unwrap();
        assert!(check_feasibility(&trace, &sol, 3.0, f64::INFINITY).unwrap().feasible());
        let w = sol.waters();
        assert!(w.windows(2).all(|p| p[0] <= p[1] + 1e-9));
        assert!((sol.total_energy - 4.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_options() {
        let m = RateModel::Logarithmic;
        let trace = Trace::constant(1, 0.0, 0.0, 1.0).unwrap();
        let bad = SolverOptions { tol: 0.0, max_iter: 10 };
        assert!(solve_offline(&trace, 1.0, 1.0, &m, &bad).is_err());
    }
}
