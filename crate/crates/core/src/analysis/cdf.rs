//! Distribution of the offline power under Bernoulli harvests on a static
//! channel with an unlimited backlog.
//!
//! With harvests `h` w.p. `p` and threshold `r = h/m`, the event `ρ̃* < r`
//! is an energy outage when `r` is spent every slot. Measured in units of
//! `r` the stored energy is `j = ⌊m x / h⌋`, each slot removes one unit and a
//! harvest adds `m`, so with `R` slots after the current one
//!
//! ```text
//! P_0(j) = [j = 0]
//! P_R(0) = 1
//! P_R(j) = (1 − p) P_{R−1}(j − 1) + p P_{R−1}(j + m − 1)
//! ```
//!
//! and `P_R(j) = 0` for `j > R`. As `R → ∞`, `P(j) = Φ^j` where `Φ` is the
//! smallest root in `(0, 1]` of `pΦ^m − Φ + 1 − p`.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::RngStream;

use super::Estimate;

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("harvest probability must lie in (0, 1), got {p}")))
    }
}

fn check_m(m: usize) -> Result<()> {
    if m >= 1 {
        Ok(())
    } else {
        Err(invalid("m must be at least 1"))
    }
}

/// Smallest root of `pΦ^m − Φ + 1 − p` in `(0, 1]`.
///
/// `Φ = 1` is always a root. An interior root exists iff the slope at 1 is
/// positive, i.e. `pm > 1`; it lies below the minimum of the polynomial at
/// `(pm)^{−1/(m−1)}`, where bisection from 0 isolates it.
pub fn phi_root(m: usize, p: f64) -> Result<f64> {
    check_m(m)?;
    check_p(p)?;
    if m == 1 || p * m as f64 <= 1.0 {
        return Ok(1.0);
    }
    let g = |x: f64| p * x.powi(m as i32) - x + 1.0 - p;
    let mut lo = 0.0;
    let mut hi = (1.0 / (p * m as f64)).powf(1.0 / (m as f64 - 1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

/// Energy in threshold units, `⌊m x / h⌋`.
fn units(x: f64, m: usize, h: f64) -> usize {
    (m as f64 * x / h).floor().max(0.0) as usize
}

/// Limit of `Pr(ρ̃* < h/m | e = x)` as the horizon grows.
pub fn asymptotic_cdf(x: f64, m: usize, p: f64, h: f64) -> Result<f64> {
    if !(x > 0.0 && h > 0.0) {
        return Err(invalid("energy and harvest size must be positive"));
    }
    if x <= h / m.max(1) as f64 {
        check_m(m)?;
        return Ok(1.0);
    }
    Ok(phi_root(m, p)?.powi(units(x, m, h) as i32))
}

/// Step coefficients `a_j = P_R(j)` for one `(p, m, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfModel {
    pub p: f64,
    pub h: f64,
    pub m: usize,
    pub remaining: usize,
    pub phi: f64,
    /// `coefficients[j] = P_R(j)`; zero beyond the end.
    pub coefficients: Vec<f64>,
}

impl CdfModel {
    pub fn new(p: f64, h: f64, m: usize, remaining: usize) -> Result<Self> {
        check_m(m)?;
        check_p(p)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("harvest size must be positive"));
        }
        let phi = phi_root(m, p)?;
        // P_r is non-increasing in j and vanishes past `end`; values below
        // UNDERFLOW are flushed so the tail never runs on subnormals.
        const UNDERFLOW: f64 = 1e-280;
        let mut a = vec![0.0; remaining + 2];
        let mut next = vec![0.0; remaining + 2];
        a[0] = 1.0;
        let mut end = 1;
        for _ in 1..=remaining {
            next[0] = 1.0;
            let mut new_end = 1;
            for j in 1..=end {
                let ahead = a.get(j + m - 1).copied().unwrap_or(0.0);
                let v = (1.0 - p) * a[j - 1] + p * ahead;
                if v < UNDERFLOW {
                    break;
                }
                next[j] = v;
                new_end = j + 1;
            }
            next[new_end..=end].iter_mut().for_each(|v| *v = 0.0);
            std::mem::swap(&mut a, &mut next);
            end = new_end;
        }
        a.truncate(end);
        Ok(CdfModel {
            p,
            h,
            m,
            remaining,
            phi,
            coefficients: a,
        })
    }

    pub fn finite(&self, x: f64) -> f64 {
        self.coefficients
            .get(units(x, self.m, self.h))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn asymptotic(&self, x: f64) -> f64 {
        if x <= self.h / self.m as f64 {
            1.0
        } else {
            self.phi.powi(units(x, self.m, self.h) as i32)
        }
    }
}

/// `Pr(ρ̃* < h/m | e = x)` with `remaining` slots after the current one.
pub fn finite_horizon_cdf(remaining: usize, x: f64, m: usize, p: f64, h: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(invalid("energy must be non-negative"));
    }
    Ok(CdfModel::new(p, h, m, remaining)?.finite(x))
}

/// Offline power on a static channel with an unlimited backlog:
/// `min_u (e + H_1 + … + H_u) / (u + 1)` over the future harvests.
pub fn offline_power_static(energy: f64, future_harvests: &[f64]) -> f64 {
    let mut best = energy;
    let mut sum = energy;
    for (u, h) in future_harvests.iter().enumerate() {
        sum += h;
        best = best.min(sum / (u + 2) as f64);
    }
    best
}

pub(crate) fn bernoulli_harvests(stream: &RngStream, len: usize, p: f64, h: f64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = stream.rng();
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { h } else { 0.0 })
        .collect()
}

/// Empirical `Pr(ρ̃* < t)` at each threshold from sampled harvest futures.
pub fn mc_cdf(
    energy: f64,
    remaining: usize,
    p: f64,
    h: f64,
    thresholds: &[f64],
    replicates: usize,
    stream: &RngStream,
) -> Result<Vec<Estimate>> {
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("harvest probability must lie in [0, 1], got {p}")));
    }
    let powers: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|i| offline_power_static(energy, &bernoulli_harvests(&stream.derive(i as u64), remaining, p, h)))
        .collect();
    Ok(thresholds
        .iter()
        .map(|&t| {
            let hits = powers.iter().filter(|&&x| x < t).count() as f64;
            let n = replicates as f64;
            let q = hits / n;
            Estimate {
                mean: q,
                se: (q * (1.0 - q) / n).sqrt(),
                n: replicates,
            }
        })
        .collect())
}
