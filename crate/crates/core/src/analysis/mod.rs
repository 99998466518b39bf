//! Monte Carlo and exact analysis of schedules: efficiency, immediate fill
//! and its lower bounds, and the distribution of the offline power.

mod cdf;
mod efficiency;
mod fill;
mod enumeration;

use serde::{Deserialize, Serialize};

pub use cdf::{asymptotic_cdf, finite_horizon_cdf, mc_cdf, offline_power_static, phi_root, CdfModel};
pub use efficiency::{efficiency_estimate, paired_experiment, ExperimentResult, PolicySummary};
pub use fill::{
    fill_lower_bound, fill_bounds_at_mean_power, immediate_fill, immediate_fill_static, immediate_loss_estimate,
    static_offline_value, FillBounds, FillReport, StaticHarvest,
};
pub use enumeration::{verify_fill_bound, FillBoundReport, ENUMERATION_PATH_CAP};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// Mean and `s/√n` with the unbiased sample variance; `se = 0` for one sample.
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { mean, se, n }
    }

    /// Estimate of `E[a − b]` from paired samples.
    pub fn paired_difference(a: &[f64], b: &[f64]) -> Estimate {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Estimate::from_samples(&d)
    }

    /// True unless `self` is below `other` by more than `k` combined errors.
    pub fn at_least(&self, other: &Estimate, k: f64) -> bool {
        self.mean >= other.mean - k * self.se.hypot(other.se)
    }
}

/// `Σx / Σy` with a delta-method error from paired samples.
pub(crate) fn ratio_of_means(x: &[f64], y: &[f64]) -> Option<Estimate> {
    let n = x.len();
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    if my <= 0.0 {
        return None;
    }
    let r = mx / my;
    let se = if n > 1 {
        let var = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - r * b).powi(2))
            .sum::<f64>()
            / (n - 1) as f64;
        (var / n as f64).sqrt() / my
    } else {
        0.0
    };
    Some(Estimate { mean: r, se, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[7.0]).se, 0.0);
    }

    #[test]
    fn ratio_of_identical_samples_is_one() {
        let x = [1.0, 3.0, 2.0];
        let r = ratio_of_means(&x, &x).unwrap();
        assert_eq!(r.mean, 1.0);
        assert!(r.se.abs() < 1e-15);
        assert!(ratio_of_means(&[1.0], &[0.0]).is_none());
    }
}
