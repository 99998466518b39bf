//! Energy- and data-side upper bounds on the water level of one slot.
//!
//! For a trial water level `w` applied from slot `n` to every later slot, each
//! window `n..=n+u` yields a candidate bound. Two algebraic forms are provided:
//!
//! * the general form with correction terms `K^e_l(w) = w − ρ_l(w)` and
//!   `K^b_l(w) = w − r_l(w)`, valid for any rate model, and
//! * the logarithmic form with `M^e_l(w) = min{1/γ_l, w}` and
//!   `M^b_l(w) = log₂ min{1/γ_l, w}`, whose data bound lives in `log₂` units.
//!
//! Alongside the bounds every evaluation reports the *excesses*
//!
//! ```text
//! φ_e(w) = min_u (e_n + ΣH − Σρ_l(w)) / (u + 1)
//! φ_b(w) = min_v (b_n + ΣB − Σr_l(w)) / (v + 1)
//! ```
//!
//! which are the slack left in the tightest window. `w` is a fixed point of
//! `min{w_energy, w_data}` exactly when `min{φ_e, φ_b} = 0`, and both excesses
//! are non-increasing in `w`, so they drive the root finder.

use serde::{Deserialize, Serialize};

use crate::buffer::BufferState;
use crate::error::{invalid, Result};
use crate::rate::RateModel;
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterBounds {
    /// Trial water level the bounds were evaluated at.
    pub water: f64,
    pub w_energy: f64,
    /// Data-side bound in water-level units. Infinite for an unlimited buffer.
    pub w_data: f64,
    /// Entry `u` is `Σ_{l=n}^{n+u}` of the energy correction term.
    pub energy_corrections: Vec<f64>,
    /// Entry `v` is `Σ_{l=n}^{n+v}` of the data correction term.
    pub data_corrections: Vec<f64>,
    pub energy_excess: f64,
    pub data_excess: f64,
    /// Window length index `u` attaining `energy_excess`.
    pub energy_window: usize,
    pub data_window: usize,
    /// `dφ_e/dw` on the attaining window.
    pub energy_slope: f64,
    /// `dφ_b/d ln w` on the attaining window.
    pub data_slope: f64,
}

impl WaterBounds {
    pub fn bound(&self) -> f64 {
        self.w_energy.min(self.w_data)
    }

    pub fn excess(&self) -> f64 {
        self.energy_excess.min(self.data_excess)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Form {
    General,
    Logarithmic,
}

pub(crate) fn validate_slot(slot: usize, trace: &Trace, state: &BufferState) -> Result<()> {
    if slot >= trace.n_slots() {
        return Err(invalid(format!(
            "slot {slot} outside horizon {}",
            trace.n_slots()
        )));
    }
    if state.slot != slot {
        return Err(invalid(format!(
            "state is at slot {} but slot {slot} was requested",
            state.slot
        )));
    }
    Ok(())
}

/// Energy and data water bounds with `K` correction terms, using `model` for the power
/// and rate of every slot.
pub fn water_bounds_general(
    w: f64,
    slot: usize,
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
) -> Result<WaterBounds> {
    check_water(w)?;
    validate_slot(slot, trace, state)?;
    Ok(evaluate(w, slot, trace, state, model, Form::General))
}

/// Bounds in the logarithmic form with `M` correction terms.
pub fn water_bounds_log(
    w: f64,
    slot: usize,
    trace: &Trace,
    state: &BufferState,
) -> Result<WaterBounds> {
    check_water(w)?;
    validate_slot(slot, trace, state)?;
    Ok(evaluate(
        w,
        slot,
        trace,
        state,
        &RateModel::Logarithmic,
        Form::Logarithmic,
    ))
}

/// The natural form for `model`: logarithmic for [`RateModel::Logarithmic`],
/// general otherwise.
pub fn water_bounds(
    w: f64,
    slot: usize,
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
) -> Result<WaterBounds> {
    match model {
        RateModel::Logarithmic => water_bounds_log(w, slot, trace, state),
        RateModel::General(_) => water_bounds_general(w, slot, trace, state, model),
    }
}

fn check_water(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("trial water level must be positive, got {w}")))
    }
}

/// Unchecked evaluation shared by the solver's inner loop.
pub(crate) fn evaluate_natural(
    w: f64,
    slot: usize,
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
) -> WaterBounds {
    let form = if model.is_logarithmic() {
        Form::Logarithmic
    } else {
        Form::General
    };
    evaluate(w, slot, trace, state, model, form)
}

fn evaluate(
    w: f64,
    slot: usize,
    trace: &Trace,
    state: &BufferState,
    model: &RateModel,
    form: Form,
) -> WaterBounds {
    let len = trace.n_slots() - slot;
    let mut energy_corrections = Vec::with_capacity(len);
    let mut data_corrections = Vec::with_capacity(len);

    let mut energy_in = state.energy;
    let mut data_in = state.data;
    let (mut corr_e, mut corr_b) = (0.0, 0.0);
    let (mut spent, mut sent) = (0.0, 0.0);
    let (mut d_spent, mut d_sent) = (0.0, 0.0);

    let mut w_energy = f64::INFINITY;
    let mut w_data = f64::INFINITY;
    let mut b = WaterBounds {
        water: w,
        w_energy: 0.0,
        w_data: 0.0,
        energy_corrections: Vec::new(),
        data_corrections: Vec::new(),
        energy_excess: f64::INFINITY,
        data_excess: f64::INFINITY,
        energy_window: 0,
        data_window: 0,
        energy_slope: 0.0,
        data_slope: 0.0,
    };

    for u in 0..len {
        let l = slot + u;
        let gain = if u == 0 { state.gain } else { trace.gains()[l] };
        if u > 0 {
            energy_in += trace.harvests()[l];
            data_in += trace.arrivals()[l];
        }
        let rho = model.power(w, gain);
        let rate = model.rate_at_water(w, gain);
        spent += rho;
        sent += rate;
        d_spent += model.power_slope(w, gain);
        d_sent += model.rate_log_slope(w, gain);

        let k = (u + 1) as f64;
        match form {
            Form::General => {
                corr_e += w - rho;
                corr_b += w - rate;
                w_energy = w_energy.min((energy_in + corr_e) / k);
                w_data = w_data.min((data_in + corr_b) / k);
            }
            Form::Logarithmic => {
                let floor = (1.0 / gain).min(w);
                corr_e += floor;
                corr_b += floor.log2();
                w_energy = w_energy.min((energy_in + corr_e) / k);
                // Kept in log₂ units until the loop ends.
                w_data = w_data.min((2.0 * data_in + corr_b) / k);
            }
        }
        energy_corrections.push(corr_e);
        data_corrections.push(corr_b);

        let phi_e = (energy_in - spent) / k;
        if phi_e < b.energy_excess {
            b.energy_excess = phi_e;
            b.energy_window = u;
            b.energy_slope = -d_spent / k;
        }
        let phi_b = (data_in - sent) / k;
        if phi_b < b.data_excess {
            b.data_excess = phi_b;
            b.data_window = u;
            b.data_slope = -d_sent / k;
        }
    }

    b.w_energy = w_energy;
    b.w_data = match form {
        Form::General => w_data,
        Form::Logarithmic => w_data.exp2(),
    };
    b.energy_corrections = energy_corrections;
    b.data_corrections = data_corrections;
    b
}
