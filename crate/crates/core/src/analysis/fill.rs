//! Immediate loss and fill of a single decision, and lower bounds on the fill
//! for a static channel with an unlimited backlog.
//!
//! The loss of a decision on one realisation of the future is the offline
//! value from the current state minus the decision's rate and the offline
//! value from the state it leads to. It is non-negative on every realisation,
//! because the offline schedule is optimal for that realisation. The fill is
//! `gain / (gain + E[loss])`, taken as 1 when both vanish.
//!
//! Every estimator here pairs its samples: one future per replicate, shared by
//! all quantities computed from that replicate.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{apply_slot, clamp_power, max_feasible_power, BufferState, SlotDecision, FEASIBILITY_TOL};
use crate::error::{invalid, Result};
use crate::offline::{offline_value_from, SolverOptions};
use crate::processes::{JointState, ScenarioModel};
use crate::rate::RateModel;
use crate::rng::RngStream;
use crate::trace::Trace;

use super::cdf::{bernoulli_harvests, offline_power_static};
use super::Estimate;

/// Bernoulli harvests of size `h` with probability `p`, unit channel gain and
/// an unlimited backlog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticHarvest {
    pub p: f64,
    pub h: f64,
}

impl StaticHarvest {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) || !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("bad harvest law p = {}, h = {}", self.p, self.h)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    /// Rate of the decision itself.
    pub gain: f64,
    /// Raw estimate; may dip below zero only through solver tolerance.
    pub loss: Estimate,
    pub fill: f64,
    pub fill_se: f64,
}

impl FillReport {
    fn new(gain: f64, loss: Estimate) -> FillReport {
        let l = loss.mean.max(0.0);
        if gain + l <= 0.0 {
            return FillReport {
                gain,
                loss,
                fill: 1.0,
                fill_se: 0.0,
            };
        }
        let total = gain + l;
        FillReport {
            gain,
            loss,
            fill: gain / total,
            fill_se: gain / (total * total) * loss.se,
        }
    }
}

fn static_rate(power: f64) -> f64 {
    0.5 * power.ln_1p() / LN_2
}

/// Offline throughput on a static channel from energy `energy` now, with
/// `future_harvests` arriving in the following slots.
pub fn static_offline_value(energy: f64, future_harvests: &[f64]) -> f64 {
    let mut e = energy;
    let mut total = 0.0;
    for k in 0..=future_harvests.len() {
        let rest = &future_harvests[k..];
        let rho = offline_power_static(e, rest);
        total += static_rate(rho);
        if let Some(h) = rest.first() {
            e = (e - rho).max(0.0) + h;
        }
    }
    total
}

struct StaticSample {
    rho_star: f64,
    /// Offline power one slot later after the decision; `None` at the horizon.
    rho_after: Option<f64>,
    loss: f64,
}

fn static_sample(rho: f64, energy: f64, future: &[f64]) -> StaticSample {
    let rho_star = offline_power_static(energy, future);
    let now = static_offline_value(energy, future);
    match future.split_first() {
        None => StaticSample {
            rho_star,
            rho_after: None,
            loss: now - static_rate(rho),
        },
        Some((h, rest)) => {
            let e_next = (energy - rho).max(0.0) + h;
            StaticSample {
                rho_star,
                rho_after: Some(offline_power_static(e_next, rest)),
                loss: now - static_rate(rho) - static_offline_value(e_next, rest),
            }
        }
    }
}

fn static_inputs(energy: f64, harvest: &StaticHarvest, replicates: usize) -> Result<()> {
    harvest.validate()?;
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    if !(energy >= 0.0 && energy.is_finite()) {
        return Err(invalid("energy must be finite and non-negative"));
    }
    Ok(())
}

fn static_samples(
    rho: f64,
    energy: f64,
    remaining: usize,
    harvest: &StaticHarvest,
    replicates: usize,
    stream: &RngStream,
) -> Vec<StaticSample> {
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let future = bernoulli_harvests(&stream.derive(i as u64), remaining, harvest.p, harvest.h);
            static_sample(rho, energy, &future)
        })
        .collect()
}

fn check_static_power(rho: f64, energy: f64) -> Result<()> {
    if rho >= 0.0 && rho <= energy + FEASIBILITY_TOL {
        Ok(())
    } else {
        Err(invalid(format!("power {rho} outside [0, {energy}]")))
    }
}

/// Fill of spending `rho` now with `energy` stored and `remaining` slots left.
pub fn immediate_fill_static(
    rho: f64,
    energy: f64,
    remaining: usize,
    harvest: &StaticHarvest,
    replicates: usize,
    stream: &RngStream,
) -> Result<FillReport> {
    static_inputs(energy, harvest, replicates)?;
    check_static_power(rho, energy)?;
    let samples = static_samples(rho, energy, remaining, harvest, replicates, stream);
    let losses: Vec<f64> = samples.iter().map(|s| s.loss).collect();
    Ok(FillReport::new(static_rate(rho), Estimate::from_samples(&losses)))
}

/// Lower bound on the fill of `rho` built from the offline power now and
/// one slot after the decision:
/// `ln(1+ρ) / (E[ln(1+ρ̃*)] + E[(ρ − ρ̃*)⁺ / (1 + ρ̃▷)])`.
pub fn fill_lower_bound(
    rho: f64,
    energy: f64,
    remaining: usize,
    harvest: &StaticHarvest,
    replicates: usize,
    stream: &RngStream,
) -> Result<Estimate> {
    static_inputs(energy, harvest, replicates)?;
    check_static_power(rho, energy)?;
    let samples = static_samples(rho, energy, remaining, harvest, replicates, stream);
    Ok(general_bound_from(rho, &samples))
}

fn general_bound_from(rho: f64, samples: &[StaticSample]) -> Estimate {
    let terms: Vec<f64> = samples
        .iter()
        .map(|s| {
            let overshoot = match s.rho_after {
                Some(a) => (rho - s.rho_star).max(0.0) / (1.0 + a),
                None => 0.0,
            };
            s.rho_star.ln_1p() + overshoot
        })
        .collect();
    let d = Estimate::from_samples(&terms);
    let num = rho.ln_1p();
    if num == 0.0 {
        return Estimate { mean: if d.mean == 0.0 { 1.0 } else { 0.0 }, se: 0.0, n: d.n };
    }
    Estimate {
        mean: num / d.mean,
        se: num / (d.mean * d.mean) * d.se,
        n: d.n,
    }
}

/// Fill bounds for the decision `ρ = E[ρ̃*]`, all from one sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillBounds {
    /// Sample mean of the offline power, used as the decision.
    pub mean_power: Estimate,
    /// `1 / (1 + E[(Ē − ρ̃*)⁺/(1 + ρ̃▷)] / ln(1 + Ē))`.
    pub lb: Estimate,
    /// Drops the `1 + ρ̃▷` divisor.
    pub simplified: Estimate,
    /// Replaces the mean shortfall with the standard deviation.
    pub variance: Estimate,
    /// The bound for a general decision, evaluated at `Ē`.
    pub general: Estimate,
    /// Monte Carlo fill of the decision `Ē`.
    pub fill: FillReport,
}

fn one_over_one_plus(shortfall: Estimate, scale: f64) -> Estimate {
    if scale <= 0.0 {
        let v = if shortfall.mean <= 0.0 { 1.0 } else { 0.0 };
        return Estimate { mean: v, se: 0.0, n: shortfall.n };
    }
    let v = 1.0 / (1.0 + shortfall.mean / scale);
    Estimate {
        mean: v,
        se: v * v / scale * shortfall.se,
        n: shortfall.n,
    }
}

pub fn fill_bounds_at_mean_power(
    energy: f64,
    remaining: usize,
    harvest: &StaticHarvest,
    replicates: usize,
    stream: &RngStream,
) -> Result<FillBounds> {
    static_inputs(energy, harvest, replicates)?;
    let stars: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let future = bernoulli_harvests(&stream.derive(i as u64), remaining, harvest.p, harvest.h);
            offline_power_static(energy, &future)
        })
        .collect();
    let mean_power = Estimate::from_samples(&stars);
    let rho = mean_power.mean.min(energy);
    let samples = static_samples(rho, energy, remaining, harvest, replicates, stream);
    let scale = rho.ln_1p();

    let shortfall_after: Vec<f64> = samples
        .iter()
        .map(|s| match s.rho_after {
            Some(a) => (rho - s.rho_star).max(0.0) / (1.0 + a),
            None => 0.0,
        })
        .collect();
    let shortfall: Vec<f64> = samples.iter().map(|s| (rho - s.rho_star).max(0.0)).collect();
    let n = replicates as f64;
    // Population form, so the chain of inequalities holds sample by sample.
    let sd = (stars.iter().map(|x| (x - rho).powi(2)).sum::<f64>() / n).sqrt();
    let sd_est = Estimate {
        mean: sd,
        se: sd / (2.0 * n).sqrt(),
        n: replicates,
    };
    let losses: Vec<f64> = samples.iter().map(|s| s.loss).collect();
    Ok(FillBounds {
        mean_power,
        lb: one_over_one_plus(Estimate::from_samples(&shortfall_after), scale),
        simplified: one_over_one_plus(Estimate::from_samples(&shortfall), scale),
        variance: one_over_one_plus(sd_est, scale),
        general: general_bound_from(rho, &samples),
        fill: FillReport::new(static_rate(rho), Estimate::from_samples(&losses)),
    })
}

/// Loss of `decision` at `state` on one future; `trace` starts at the
/// current slot and `state.slot` is 0.
pub(crate) fn realised_loss(trace: &Trace, state: &BufferState, decision: &SlotDecision, opts: &SolverOptions) -> Result<f64> {
    let model = RateModel::Logarithmic;
    let now = offline_value_from(trace, state, &model, opts)?;
    let later = if state.slot + 1 < trace.n_slots() {
        let k = state.slot + 1;
        let next = apply_slot(state, decision, trace.harvests()[k], trace.arrivals()[k], trace.gains()[k])?;
        offline_value_from(trace, &next, &model, opts)?
    } else {
        0.0
    };
    Ok(now - decision.rate - later)
}

fn scenario_decision(power: f64, state: &BufferState) -> Result<SlotDecision> {
    let model = RateModel::Logarithmic;
    let cap = max_feasible_power(&model, state);
    if !(power >= 0.0 && power <= cap + FEASIBILITY_TOL) {
        return Err(invalid(format!("power {power} outside [0, {cap}]")));
    }
    Ok(clamp_power(&model, state, power))
}

/// Expected loss of spending `power` at `state` when the scenario's chains
/// are in joint state `current`, over sampled futures.
pub fn immediate_loss_estimate(
    power: f64,
    state: &BufferState,
    current: JointState,
    scenario: &ScenarioModel,
    replicates: usize,
    stream: &RngStream,
) -> Result<Estimate> {
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    if state.slot >= scenario.horizon {
        return Err(invalid("state lies beyond the scenario horizon"));
    }
    let chains = scenario.chains()?;
    let decision = scenario_decision(power, state)?;
    let (h, b, g) = chains.value(current);
    let len = scenario.horizon - 1 - state.slot;
    let start = BufferState { slot: 0, ..*state };
    let opts = SolverOptions::default();
    let losses: Result<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.derive(i as u64).rng();
            let (hs, bs, gs) = chains.continuation(current, len, &mut rng);
            let trace = Trace::new(
                std::iter::once(h).chain(hs).collect(),
                std::iter::once(b).chain(bs).collect(),
                std::iter::once(g).chain(gs).collect(),
            )?;
            realised_loss(&trace, &start, &decision, &opts)
        })
        .collect();
    Ok(Estimate::from_samples(&losses?))
}

pub fn immediate_fill(
    power: f64,
    state: &BufferState,
    current: JointState,
    scenario: &ScenarioModel,
    replicates: usize,
    stream: &RngStream,
) -> Result<FillReport> {
    let decision = scenario_decision(power, state)?;
    let loss = immediate_loss_estimate(power, state, current, scenario, replicates, stream)?;
    Ok(FillReport::new(decision.rate, loss))
}
