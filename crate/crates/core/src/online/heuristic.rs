use std::f64::consts::LN_2;

use crate::buffer::{max_feasible_power, SlotDecision};
use crate::error::Result;
use crate::offline::{decide, iterate_fixed_point, Probe, SolverOptions};
use crate::rate::RateModel;

use super::{spend_all, Policy, PolicyContext};

/// Running-average estimate of the offline water level.
///
/// The unknown future harvests, arrivals and correction terms of the offline
/// bounds are replaced by time averages of the history. With `R = N − n + 1`
/// slots left including this one and averages `H̄`, `B̄`:
///
/// ```text
/// ŵ^e = (e − H̄)/R + H̄ + M̄^e(w)          if e ≥ H̄, else e + M̄^e(w)
/// log₂ ŵ^b = 2(b − B̄)/R + 2B̄ + M̄^b(w)   if b ≥ B̄, else 2b + M̄^b(w)
/// ```
///
/// where `M̄` averages the correction terms over the observed gains at the
/// trial level `w`. These are the offline bounds evaluated on a continuation
/// equal to the averages, so a constant trace reproduces the offline level.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPolicy {
    pub opts: SolverOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicOutcome {
    pub decision: SlotDecision,
    pub converged: bool,
    pub iterations: usize,
}

pub fn heuristic_decide(ctx: &PolicyContext<'_>, opts: &SolverOptions) -> Result<HeuristicOutcome> {
    let model = RateModel::Logarithmic;
    let s = ctx.state;
    let done = |decision| HeuristicOutcome {
        decision,
        converged: true,
        iterations: 0,
    };
    if max_feasible_power(&model, &s) <= 0.0 {
        return Ok(done(SlotDecision::idle(&model, s.gain)));
    }
    if ctx.is_last() {
        return Ok(done(spend_all(&s)));
    }

    let left = (ctx.horizon - s.slot) as f64;
    let h_bar = ctx.stats.mean_harvest();
    let b_bar = ctx.stats.mean_arrival();
    let a_e = if s.energy >= h_bar {
        (s.energy - h_bar) / left + h_bar
    } else {
        s.energy
    };
    let a_b = if s.data.is_infinite() {
        f64::INFINITY
    } else if s.data >= b_bar {
        2.0 * (s.data - b_bar) / left + 2.0 * b_bar
    } else {
        2.0 * s.data
    };
    let gains = ctx.stats.gains();
    let k = gains.len() as f64;

    let probe = |w: f64| {
        let (mut m_e, mut m_b, mut spent, mut sent, mut active) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &g in gains {
            let floor = (1.0 / g).min(w);
            m_e += floor;
            m_b += floor.log2();
            spent += w - floor;
            sent += 0.5 * (w.log2() - floor.log2());
            if w > 1.0 / g {
                active += 1.0;
            }
        }
        let (m_e, m_b, spent, sent, active) = (m_e / k, m_b / k, spent / k, sent / k, active / k);
        let w_e = a_e + m_e;
        let w_b = (a_b + m_b).exp2();
        Probe::from_pieces(
            w,
            w_e.min(w_b),
            (a_e - spent, -active),
            (0.5 * a_b - sent, -active / (2.0 * LN_2)),
        )
    };

    let seed = s.energy.min((2.0 * s.data).exp2());
    let log = iterate_fixed_point(seed, opts.tol, opts.max_iter, probe);
    Ok(HeuristicOutcome {
        decision: decide(&model, &s, log.last()),
        converged: log.converged,
        iterations: log.iterations_used,
    })
}

impl Policy for HeuristicPolicy {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn decide(&self, ctx: &PolicyContext<'_>) -> Result<SlotDecision> {
        heuristic_decide(ctx, &self.opts).map(|o| o.decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::buffer::BufferState;
    use crate::offline::fixed_point_water;
    use crate::online::RunningStats;
    use crate::rng::RngStream;
    use crate::trace::Trace;

    fn ctx<'a>(state: BufferState, horizon: usize, stats: &'a RunningStats) -> PolicyContext<'a> {
        PolicyContext {
            state,
            horizon,
            stats,
            model: None,
            rng: RngStream::new(0, 0),
        }
    }

    #[test]
    fn last_slot_spends_the_binding_buffer() {
        let mut stats = RunningStats::new();
        stats.observe(1.0, 1.0, 1.0);
        let s = BufferState::new(5.0, f64::INFINITY, 1.0, 3).unwrap();
        let d = heuristic_decide(&ctx(s, 4, &stats), &SolverOptions::default()).unwrap().decision;
        assert_eq!(d.power, 5.0);
        let s = BufferState::new(50.0, 1.0, 1.0, 3).unwrap();
        let d = heuristic_decide(&ctx(s, 4, &stats), &SolverOptions::default()).unwrap().decision;
        assert!((d.rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_energy_is_idle() {
        let mut stats = RunningStats::new();
        stats.observe(0.0, 1.0, 2.0);
        let s = BufferState::new(0.0, 3.0, 2.0, 0).unwrap();
        let d = heuristic_decide(&ctx(s, 5, &stats), &SolverOptions::default()).unwrap().decision;
        assert_eq!(d.power, 0.0);
    }

    #[test]
    fn constant_trace_matches_offline() {
        let (h, b, g) = (2.0, 0.7, 1.5);
        let n = 10;
        let trace = Trace::constant(n, h, b, g).unwrap();
        for slot in [0, 3, 8] {
            let stats = RunningStats::from_history(&trace, slot);
            for &(e, d) in &[(4.0, 3.0), (1.0, 0.2), (12.0, f64::INFINITY), (0.5, 9.0)] {
                let s = BufferState::new(e, d, g, slot).unwrap();
                let out = heuristic_decide(&ctx(s, n, &stats), &SolverOptions::default()).unwrap();
                assert!(out.converged);
                let (w, _) = fixed_point_water(slot, &trace, &s, &RateModel::Logarithmic, &SolverOptions::default()).unwrap();
                let expect = RateModel::Logarithmic.power_from_water(w, g).unwrap();
                assert!(
                    (out.decision.power - expect).abs() < 1e-8,
                    "slot {slot} e {e} b {d}: {} vs {expect}",
                    out.decision.power
                );
            }
        }
    }
}
