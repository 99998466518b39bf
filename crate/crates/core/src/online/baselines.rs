use crate::buffer::{clamp_power, BufferState, SlotDecision};
use crate::error::{invalid, Error, Result};
use crate::offline::{decide, fixed_point_water, SolverOptions};
use crate::rate::RateModel;
use crate::trace::Trace;

use super::{spend_all, Policy, PolicyContext};

/// Spends half the stored energy each slot and everything in the last one.
#[derive(Debug, Clone, Copy, Default)]
pub struct PowerHalvingPolicy;

pub fn power_halving_decide(ctx: &PolicyContext<'_>) -> SlotDecision {
    if ctx.is_last() {
        return spend_all(&ctx.state);
    }
    clamp_power(&RateModel::Logarithmic, &ctx.state, 0.5 * ctx.state.energy)
}

impl Policy for PowerHalvingPolicy {
    fn name(&self) -> String {
        "power_halving".into()
    }

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision> {
        Ok(power_halving_decide(ctx))
    }
}

/// Never transmits.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn name(&self) -> String {
        "zero".into()
    }

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision> {
        Ok(SlotDecision::idle(&RateModel::Logarithmic, ctx.state.gain))
    }
}

/// Replays a fixed schedule; the simulator clamps anything infeasible.
#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    decisions: Vec<SlotDecision>,
}

impl ReplayPolicy {
    pub fn new(decisions: Vec<SlotDecision>) -> Self {
        ReplayPolicy { decisions }
    }
}

impl Policy for ReplayPolicy {
    fn name(&self) -> String {
        "replay".into()
    }

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision> {
        self.decisions
            .get(ctx.slot())
            .copied()
            .ok_or_else(|| invalid(format!("no replayed decision for slot {}", ctx.slot())))
    }
}

/// Averages the offline water level over sampled continuations of the
/// scenario's chains, started from the state implied by the current
/// observation.
#[derive(Debug, Clone, Copy)]
pub struct MeanOfflinePolicy {
    samples: usize,
    opts: SolverOptions,
}

impl MeanOfflinePolicy {
    pub fn new(samples: usize, opts: SolverOptions) -> Result<Self> {
        if samples == 0 {
            return Err(invalid("mean_offline needs at least one sample"));
        }
        Ok(MeanOfflinePolicy { samples, opts })
    }
}

pub fn mean_offline_decide(
    ctx: &PolicyContext<'_>,
    samples: usize,
    opts: &SolverOptions,
) -> Result<SlotDecision> {
    let model = ctx
        .model
        .ok_or_else(|| Error::UnsupportedPolicy("mean_offline without a scenario model".into()))?;
    if ctx.is_last() {
        return Ok(spend_all(&ctx.state));
    }
    let (h, b, g) = ctx
        .stats
        .current()
        .ok_or_else(|| invalid("no observation for the current slot"))?;
    let current = model
        .infer_state(h, b, g)
        .ok_or_else(|| invalid(format!("observation ({h}, {b}, {g}) not emitted by the scenario")))?;
    let chains = model.chains()?;
    let log = RateModel::Logarithmic;
    let state = BufferState {
        slot: 0,
        ..ctx.state
    };
    let mut rng = ctx.rng.rng();
    let mut sum = 0.0;
    for _ in 0..samples {
        let (mut hs, mut bs, mut gs) = chains.continuation(current, ctx.remaining(), &mut rng);
        hs.insert(0, h);
        bs.insert(0, b);
        gs.insert(0, g);
        let trace = Trace::new(hs, bs, gs)?;
        let (w, _) = fixed_point_water(0, &trace, &state, &log, opts)?;
        sum += w;
    }
    Ok(decide(&log, &ctx.state, sum / samples as f64))
}

impl Policy for MeanOfflinePolicy {
    fn name(&self) -> String {
        format!("mean_offline({})", self.samples)
    }

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision> {
        mean_offline_decide(ctx, self.samples, &self.opts)
    }
}
