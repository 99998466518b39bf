use crate::buffer::{apply_slot, clamp_power, max_feasible_power, BufferState, Schedule, SlotDecision};
use crate::error::{invalid, Error, Result};
use crate::rate::RateModel;
use crate::trace::Trace;

pub const BRUTE_FORCE_MAX_SLOTS: usize = 6;
pub const BRUTE_FORCE_MAX_GRID: usize = 64;

/// Exhaustive search over per-slot power grids.
///
/// Slot `n` may use any of `grid_points` evenly spaced powers in
/// `[0, p_max(n)]`, where `p_max` is the largest power the simulated buffers
/// allow. The last slot always spends its maximum since rate is increasing.
pub fn brute_force_offline(
    trace: &Trace,
    e_1: f64,
    b_1: f64,
    grid_points: usize,
    model: &RateModel,
) -> Result<Schedule> {
    let n = trace.n_slots();
    if n > BRUTE_FORCE_MAX_SLOTS {
        return Err(Error::HorizonTooLarge {
            horizon: n,
            max: BRUTE_FORCE_MAX_SLOTS,
        });
    }
    if !(2..=BRUTE_FORCE_MAX_GRID).contains(&grid_points) {
        return Err(invalid(format!(
            "grid_points must be in 2..={BRUTE_FORCE_MAX_GRID}, got {grid_points}"
        )));
    }
    let start = BufferState::initial(trace, e_1, b_1)?;
    let mut search = Search {
        trace,
        model,
        grid: grid_points,
        path: Vec::with_capacity(n),
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
    };
    search.descend(start, 0.0)?;
    Ok(Schedule::new(search.best))
}

/// Worst-case throughput lost to grid quantisation: each slot's power is at
/// most one step below any target and the marginal rate never exceeds its
/// value at zero power.
pub fn grid_resolution_slack(trace: &Trace, e_1: f64, grid_points: usize, model: &RateModel) -> f64 {
    let total: f64 = e_1 + trace.harvests().iter().sum::<f64>();
    let step = total / (grid_points.max(2) - 1) as f64;
    trace
        .gains()
        .iter()
        .map(|&g| step * model.marginal_rate_at_zero(g))
        .sum()
}

struct Search<'a> {
    trace: &'a Trace,
    model: &'a RateModel,
    grid: usize,
    path: Vec<SlotDecision>,
    best: Vec<SlotDecision>,
    best_value: f64,
}

impl Search<'_> {
    fn descend(&mut self, state: BufferState, value: f64) -> Result<()> {
        let n = state.slot;
        let last = n + 1 == self.trace.n_slots();
        let p_max = max_feasible_power(self.model, &state);
        if last {
            let d = clamp_power(self.model, &state, p_max);
            let total = value + d.rate;
            if total > self.best_value {
                self.best_value = total;
                self.best.clear();
                self.best.extend_from_slice(&self.path);
                self.best.push(d);
            }
            return Ok(());
        }
        let levels = if p_max > 0.0 { self.grid } else { 1 };
        for i in 0..levels {
            let p = if levels == 1 {
                0.0
            } else {
                p_max * i as f64 / (levels - 1) as f64
            };
            let d = clamp_power(self.model, &state, p);
            let next = apply_slot(
                &state,
                &d,
                self.trace.harvests()[n + 1],
                self.trace.arrivals()[n + 1],
                self.trace.gains()[n + 1],
            )?;
            self.path.push(d);
            self.descend(next, value + d.rate)?;
            self.path.pop();
        }
        Ok(())
    }
}
