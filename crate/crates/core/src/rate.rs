//! Rate functions and the water-level parameterisation of a slot decision.
//!
//! A slot decision is described by a water level `w`. For a rate function `f`
//! with channel gain `γ` the transmit power is
//!
//! ```text
//! ρ = (1/γ) · [ (f')⁻¹(1/(wγ)) − 1 ]⁺
//! ```
//!
//! and the rate is `f(1 + ργ)`. In this parameterisation the marginal rate per
//! unit of power is `1/w` whenever the slot is active.
//!
//! [`RateModel::Logarithmic`] is the AWGN case `f = ½·log₂` with the water level
//! rescaled by `2 ln 2`, which turns the conversions into
//! `ρ = [w − 1/γ]⁺` and `r = [½·log₂(wγ)]⁺`. All online and analysis code uses
//! this convention; [`RateModel::General`] accepts any concave rate function
//! with an analytic inverse marginal.

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};

/// A concave, increasing throughput map `f` on `[1, ∞)` with `f(1) = 0`.
pub trait RateFunction: Send + Sync + fmt::Debug {
    fn eval(&self, x: f64) -> f64;

    fn marginal(&self, x: f64) -> f64;

    /// `(f')⁻¹(y)` for `y` in the range of `f'`.
    fn inverse_marginal(&self, y: f64) -> f64;

    /// `f''(x)`, negative on `(1, ∞)`. Drives Newton steps in the offline
    /// solver; the default central difference is adequate for smooth `f`.
    fn curvature(&self, x: f64) -> f64 {
        let h = 1e-5 * x;
        (self.marginal(x + h) - self.marginal(x - h)) / (2.0 * h)
    }

    /// `f⁻¹(r)` for `r ≥ 0`. Only used to find data-limited power, so the
    /// default bisection is accurate enough.
    fn inverse(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 1.0;
        }
        let mut lo = 1.0;
        let mut hi = 2.0;
        while self.eval(hi) < r {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// `f(x) = ½·log₂(x)`, the AWGN capacity per real channel use.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfLog2;

impl RateFunction for HalfLog2 {
    fn eval(&self, x: f64) -> f64 {
        0.5 * x.log2()
    }

    fn marginal(&self, x: f64) -> f64 {
        1.0 / (2.0 * LN_2 * x)
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        1.0 / (2.0 * LN_2 * y)
    }

    fn curvature(&self, x: f64) -> f64 {
        -1.0 / (2.0 * LN_2 * x * x)
    }

    fn inverse(&self, r: f64) -> f64 {
        (2.0 * r).exp2()
    }
}

/// `f(x) = √x − 1`. Concave with a much faster-growing power map than the
/// logarithm; useful for exercising the general solver away from the AWGN case.
#[derive(Debug, Clone, Copy, Default)]
pub struct SqrtRate;

impl RateFunction for SqrtRate {
    fn eval(&self, x: f64) -> f64 {
        x.sqrt() - 1.0
    }

    fn marginal(&self, x: f64) -> f64 {
        0.5 / x.sqrt()
    }

    fn inverse_marginal(&self, y: f64) -> f64 {
        0.25 / (y * y)
    }

    fn curvature(&self, x: f64) -> f64 {
        -0.25 / (x * x.sqrt())
    }

    fn inverse(&self, r: f64) -> f64 {
        (r + 1.0) * (r + 1.0)
    }
}

/// Which water-level convention a computation uses.
#[derive(Debug, Clone, Default)]
pub enum RateModel {
    /// `f = ½·log₂` with rescaled water: `ρ = [w − 1/γ]⁺`.
    #[default]
    Logarithmic,
    /// Any rate function, water levels in the general convention.
    General(Arc<dyn RateFunction>),
}

/// Factor between the general-form water level of `½·log₂` and the rescaled
/// logarithmic water level: `w_general = LOG_WATER_SCALE · w_log`.
pub const LOG_WATER_SCALE: f64 = 2.0 * LN_2;

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

fn check_gain(gain: f64) -> Result<()> {
    check_finite("gain", gain)?;
    if gain > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("gain must be positive, got {gain}")))
    }
}

impl RateModel {
    pub fn general(f: impl RateFunction + 'static) -> Self {
        RateModel::General(Arc::new(f))
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self, RateModel::Logarithmic)
    }

    /// Largest water level that still yields zero power.
    pub fn threshold(&self, gain: f64) -> f64 {
        match self {
            RateModel::Logarithmic => 1.0 / gain,
            RateModel::General(f) => 1.0 / (gain * f.marginal(1.0)),
        }
    }

    /// `d rate/dρ` at zero power, the steepest the rate ever gets.
    pub fn marginal_rate_at_zero(&self, gain: f64) -> f64 {
        match self {
            RateModel::Logarithmic => gain / LOG_WATER_SCALE,
            RateModel::General(f) => gain * f.marginal(1.0),
        }
    }

    pub fn power_from_water(&self, water: f64, gain: f64) -> Result<f64> {
        check_finite("water", water)?;
        check_gain(gain)?;
        if water < 0.0 {
            return Err(invalid(format!("water must be non-negative, got {water}")));
        }
        Ok(self.power(water, gain))
    }

    pub fn water_from_power(&self, power: f64, gain: f64) -> Result<f64> {
        check_finite("power", power)?;
        check_gain(gain)?;
        if power < 0.0 {
            return Err(invalid(format!("power must be non-negative, got {power}")));
        }
        Ok(self.water(power, gain))
    }

    pub fn rate_of(&self, water: f64, gain: f64) -> Result<f64> {
        check_finite("water", water)?;
        check_gain(gain)?;
        if water < 0.0 {
            return Err(invalid(format!("water must be non-negative, got {water}")));
        }
        Ok(self.rate_at_water(water, gain))
    }

    pub(crate) fn power(&self, water: f64, gain: f64) -> f64 {
        match self {
            RateModel::Logarithmic => (water - 1.0 / gain).max(0.0),
            RateModel::General(f) => {
                if water <= self.threshold(gain) {
                    0.0
                } else {
                    ((f.inverse_marginal(1.0 / (water * gain)) - 1.0) / gain).max(0.0)
                }
            }
        }
    }

    pub(crate) fn water(&self, power: f64, gain: f64) -> f64 {
        if power <= 0.0 {
            return self.threshold(gain);
        }
        match self {
            RateModel::Logarithmic => power + 1.0 / gain,
            RateModel::General(f) => 1.0 / (gain * f.marginal(1.0 + power * gain)),
        }
    }

    pub(crate) fn rate_at_water(&self, water: f64, gain: f64) -> f64 {
        match self {
            RateModel::Logarithmic => (0.5 * (water * gain).log2()).max(0.0),
            RateModel::General(_) => self.rate_from_power(self.power(water, gain), gain),
        }
    }

    pub fn rate_from_power(&self, power: f64, gain: f64) -> f64 {
        match self {
            RateModel::Logarithmic => 0.5 * (power * gain).ln_1p() / LN_2,
            RateModel::General(f) => f.eval(1.0 + power * gain),
        }
    }

    /// Power whose rate equals `rate` exactly (the data-limited maximum).
    pub fn power_for_rate(&self, rate: f64, gain: f64) -> f64 {
        if rate <= 0.0 {
            return 0.0;
        }
        if rate.is_infinite() {
            return f64::INFINITY;
        }
        match self {
            RateModel::Logarithmic => (2.0 * rate).exp2() / gain - 1.0 / gain,
            RateModel::General(f) => (f.inverse(rate) - 1.0) / gain,
        }
    }

    /// Right derivative `dρ/dw`.
    pub(crate) fn power_slope(&self, water: f64, gain: f64) -> f64 {
        if water <= self.threshold(gain) {
            return 0.0;
        }
        match self {
            RateModel::Logarithmic => 1.0,
            RateModel::General(f) => {
                let x = f.inverse_marginal(1.0 / (water * gain));
                -1.0 / (water * water * gain * gain * f.curvature(x))
            }
        }
    }

    /// Right derivative `d rate/d ln w`. The marginal rate per unit power is
    /// `1/w` in general units, so there it equals `dρ/dw`.
    pub(crate) fn rate_log_slope(&self, water: f64, gain: f64) -> f64 {
        match self {
            RateModel::Logarithmic => {
                if water > 1.0 / gain {
                    0.5 / LN_2
                } else {
                    0.0
                }
            }
            RateModel::General(_) => self.power_slope(water, gain),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_log2() -> RateModel {
        RateModel::general(HalfLog2)
    }

    #[test]
    fn log_mode_conversions() {
        let m = RateModel::Logarithmic;
        // Activation threshold clamps to zero.
        assert_eq!(m.power_from_water(0.5, 2.0).unwrap(), 0.0);
        assert_eq!(m.power_from_water(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(m.power_from_water(6.0, 0.5).unwrap(), 4.0);
        assert_eq!(m.water_from_power(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(m.water_from_power(0.0, 4.0).unwrap(), 0.25);
        assert_eq!(m.rate_of(4.0, 1.0).unwrap(), 1.0);
        assert_eq!(m.rate_of(0.25, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn general_zero_power_at_threshold() {
        let m = half_log2();
        for gain in [0.1, 1.0, 12.0, 30.0] {
            let thr = m.threshold(gain);
            assert_eq!(m.power_from_water(thr, gain).unwrap(), 0.0);
            assert_eq!(m.rate_of(thr, gain).unwrap(), 0.0);
            assert!(m.power_from_water(thr * 1.01, gain).unwrap() > 0.0);
            assert_eq!(m.water_from_power(0.0, gain).unwrap(), thr);
        }
    }

    #[test]
    fn general_half_log2_matches_rescaled_log() {
        let g = half_log2();
        let l = RateModel::Logarithmic;
        for &(w, gain) in &[(2.0, 1.0), (0.3, 12.0), (7.5, 0.4), (0.01, 30.0)] {
            let pg = g.power_from_water(w * LOG_WATER_SCALE, gain).unwrap();
            let pl = l.power_from_water(w, gain).unwrap();
            assert!((pg - pl).abs() <= 1e-12 * (1.0 + pl), "{pg} vs {pl}");
            let rg = g.rate_of(w * LOG_WATER_SCALE, gain).unwrap();
            let rl = l.rate_of(w, gain).unwrap();
            assert!((rg - rl).abs() <= 1e-12 * (1.0 + rl));
        }
    }

    #[test]
    fn marginal_rate_is_inverse_water() {
        // Central difference of rate in power at w = 4, γ = 1 (general units).
        let m = half_log2();
        let w = 4.0;
        let rho = m.power_from_water(w, 1.0).unwrap();
        let h = 1e-6;
        let d = (m.rate_from_power(rho + h, 1.0) - m.rate_from_power(rho - h, 1.0)) / (2.0 * h);
        assert!((d - 1.0 / w).abs() < 1e-5, "{d}");

        let s = RateModel::general(SqrtRate);
        let w = 3.0;
        let rho = s.power_from_water(w, 2.0).unwrap();
        let d = (s.rate_from_power(rho + h, 2.0) - s.rate_from_power(rho - h, 2.0)) / (2.0 * h);
        assert!((d - 1.0 / w).abs() < 1e-5, "{d}");
    }

    #[test]
    fn rate_function_shape() {
        let fs: [&dyn RateFunction; 2] = [&HalfLog2, &SqrtRate];
        for f in fs {
            assert_eq!(f.eval(1.0), 0.0);
            assert!(f.marginal(1.0).is_finite());
            assert!(f.marginal(1e12) < 1e-5);
            for &(a, b) in &[(1.0, 3.0), (2.0, 100.0), (1.5, 1.6)] {
                assert!(f.eval(b) > f.eval(a));
                assert!(f.eval(0.5 * (a + b)) >= 0.5 * (f.eval(a) + f.eval(b)));
            }
            for x in [1.0, 2.5, 40.0, 1e4] {
                let back = f.inverse_marginal(f.marginal(x));
                assert!((back - x).abs() <= 1e-9 * x);
                let inv = f.inverse(f.eval(x));
                assert!((inv - x).abs() <= 1e-9 * x);
            }
        }
    }

    #[test]
    fn data_limited_power_round_trip() {
        for m in [RateModel::Logarithmic, half_log2(), RateModel::general(SqrtRate)] {
            for &(r, gain) in &[(1.0, 1.0), (0.3, 12.0), (2.5, 0.7)] {
                let p = m.power_for_rate(r, gain);
                assert!((m.rate_from_power(p, gain) - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn analytic_slopes_match_differences() {
        let h = 1e-6;
        for m in [RateModel::Logarithmic, half_log2(), RateModel::general(SqrtRate)] {
            for &(w, gain) in &[(3.0, 1.0), (0.5, 12.0), (9.0, 0.4)] {
                let dp = (m.power(w + h, gain) - m.power(w - h, gain)) / (2.0 * h);
                assert!((m.power_slope(w, gain) - dp).abs() < 1e-6 * dp.max(1.0));
                let dr = (m.rate_at_water(w * (1.0 + h), gain)
                    - m.rate_at_water(w * (1.0 - h), gain))
                    / (2.0 * h);
                assert!((m.rate_log_slope(w, gain) - dr).abs() < 1e-6 * dr.max(1.0));
            }
        }
    }

    #[test]
    fn rejects_non_finite() {
        let m = RateModel::Logarithmic;
        assert!(m.power_from_water(f64::NAN, 1.0).is_err());
        assert!(m.power_from_water(1.0, f64::INFINITY).is_err());
        assert!(m.water_from_power(f64::INFINITY, 1.0).is_err());
        assert!(m.rate_of(1.0, 0.0).is_err());
    }
}
