use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Realised exogenous sequences over a horizon of `N` slots.
///
/// `harvests[n]` becomes usable in slot `n`, `arrivals[n]` is available at the
/// start of slot `n` and `gains[n]` is the channel gain observed in slot `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    harvests: Vec<f64>,
    arrivals: Vec<f64>,
    gains: Vec<f64>,
}

impl Trace {
    pub fn new(harvests: Vec<f64>, arrivals: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        let n = harvests.len();
        if n == 0 {
            return Err(invalid("trace must have at least one slot"));
        }
        if arrivals.len() != n || gains.len() != n {
            return Err(invalid(format!(
                "trace vectors differ in length: {} harvests, {} arrivals, {} gains",
                n,
                arrivals.len(),
                gains.len()
            )));
        }
        for (i, &h) in harvests.iter().enumerate() {
            if !(h.is_finite() && h >= 0.0) {
                return Err(invalid(format!("harvest at slot {} is {h}", i + 1)));
            }
        }
        for (i, &b) in arrivals.iter().enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid(format!("arrival at slot {} is {b}", i + 1)));
            }
        }
        for (i, &g) in gains.iter().enumerate() {
            if !(g.is_finite() && g > 0.0) {
                return Err(invalid(format!("gain at slot {} is {g}", i + 1)));
            }
        }
        Ok(Trace {
            harvests,
            arrivals,
            gains,
        })
    }

    /// Constant harvest, arrival and gain in every slot.
    pub fn constant(n_slots: usize, harvest: f64, arrival: f64, gain: f64) -> Result<Self> {
        Trace::new(
            vec![harvest; n_slots],
            vec![arrival; n_slots],
            vec![gain; n_slots],
        )
    }

    pub fn n_slots(&self) -> usize {
        self.harvests.len()
    }

    pub fn harvests(&self) -> &[f64] {
        &self.harvests
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// The trace restricted to slots `from..N` (zero-based).
    pub fn tail(&self, from: usize) -> Result<Trace> {
        if from >= self.n_slots() {
            return Err(invalid(format!(
                "tail start {from} outside horizon {}",
                self.n_slots()
            )));
        }
        Ok(Trace {
            harvests: self.harvests[from..].to_vec(),
            arrivals: self.arrivals[from..].to_vec(),
            gains: self.gains[from..].to_vec(),
        })
    }
}
