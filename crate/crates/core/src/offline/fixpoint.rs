//! Safeguarded iteration for the largest fixed point of a monotone map.
//!
//! The caller supplies a probe returning `T(w)`, the signed excess (negative
//! above the largest fixed point) and optionally a Newton target computed from
//! the active concave piece of the excess. A tangent of a concave piece lies
//! above the minimum of all pieces, so from above the Newton target lands in
//! `[w*, w)` and the iterates are non-increasing. This holds even where the
//! excess is identically zero on an interval below `w*`, and even when `T`
//! itself is not monotone. `T(w)` is the fallback when no target is offered,
//! and a bracket guards against rounding noise with bisection.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointLog {
    pub iterates: Vec<f64>,
    pub converged: bool,
    /// `|w^(k+1) − w^(k)|` at termination.
    pub residual: f64,
    pub iterations_used: usize,
    /// `|T(w) − w|` at the returned iterate.
    pub gap: f64,
}

impl FixedPointLog {
    pub fn last(&self) -> f64 {
        *self.iterates.last().expect("at least one iterate")
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Probe {
    pub bound: f64,
    pub excess: f64,
    pub newton: Option<f64>,
}

impl Probe {
    /// Probe for `min{φ_e, φ_b}` where `φ_e` is concave in `w` with slope
    /// `dφ_e/dw` and `φ_b` is concave in `ln w` with slope `dφ_b/d ln w`.
    /// Each piece's tangent root is at or above that piece's root, so the
    /// smaller target is at or above the root of the minimum.
    pub fn from_pieces(w: f64, bound: f64, energy: (f64, f64), data: (f64, f64)) -> Probe {
        let mut newton: Option<f64> = None;
        let mut offer = |t: f64| {
            if t.is_finite() && t > 0.0 {
                newton = Some(newton.map_or(t, |n| n.min(t)));
            }
        };
        let (phi_e, slope_e) = energy;
        if phi_e.is_finite() && slope_e < 0.0 {
            offer(w - phi_e / slope_e);
        }
        let (phi_b, slope_b) = data;
        if phi_b.is_finite() && slope_b < 0.0 {
            offer(w * (-phi_b / slope_b).exp());
        }
        Probe {
            bound,
            excess: phi_e.min(phi_b),
            newton,
        }
    }
}

/// Step sizes below `tol · max(1, w)` count as converged.
pub(crate) fn iterate(
    seed: f64,
    tol: f64,
    max_iter: usize,
    mut probe: impl FnMut(f64) -> Probe,
) -> FixedPointLog {
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut w = seed;
    let mut iterates = Vec::new();
    let mut step = f64::INFINITY;

    for k in 1..=max_iter {
        let p = probe(w);
        iterates.push(w);
        let gap = (p.bound - w).abs();
        let scale = tol * w.max(1.0);
        if gap <= scale || step <= scale {
            return FixedPointLog {
                iterates,
                converged: true,
                residual: step.min(gap),
                iterations_used: k,
                gap,
            };
        }

        let next = if p.excess < 0.0 {
            hi = w;
            let inside = |c: f64| c.is_finite() && c > lo && c < hi;
            match p.newton {
                Some(t) if inside(t) => t,
                _ if inside(p.bound) => p.bound,
                _ => 0.5 * (lo + hi),
            }
        } else {
            // Below the root a concave tangent overshoots past it, which is
            // where the descent above takes over.
            lo = w;
            let inside = |c: f64| c.is_finite() && c > lo && c < hi;
            let fallback = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * w.max(f64::MIN_POSITIVE)
            };
            match p.newton {
                Some(t) if inside(t) => t,
                _ if inside(p.bound) => p.bound.max(fallback),
                _ => fallback,
            }
        };

        step = (next - w).abs();
        if hi - lo <= scale {
            step = step.min(hi - lo);
        }
        w = next;
    }

    let p = probe(w);
    FixedPointLog {
        converged: false,
        residual: step,
        iterations_used: max_iter,
        gap: (p.bound - w).abs(),
        iterates,
    }
}
