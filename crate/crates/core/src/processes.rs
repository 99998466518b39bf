//! Exogenous process models and reproducible trace sampling.
//!
//! Every process is a finite Markov chain whose state determines the value
//! emitted in a slot. IID processes are chains with identical rows. Sampling
//! consumes exactly one uniform draw per process per slot (harvest, arrival,
//! channel, in that order), so the first `N` slots of a longer trace equal the
//! trace sampled with horizon `N` from the same stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;
use crate::trace::Trace;

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Process {
    Constant {
        value: f64,
    },
    /// `value` with probability `p`, else zero, independently per slot.
    Bernoulli { p: f64, value: f64 },
    /// `values[1]` with probability `p`, else `values[0]`, independently.
    TwoValue { p: f64, values: [f64; 2] },
    /// Two-state chain; `transition[i][j]` is the probability of moving from
    /// state `i` to state `j`. Starts from the stationary law unless
    /// `initial` pins a state.
    Markov {
        transition: [[f64; 2]; 2],
        values: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<usize>,
    },
}

/// Finite-chain form of a [`Process`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    pub values: Vec<f64>,
    pub initial: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl FiniteChain {
    pub fn n_states(&self) -> usize {
        self.values.len()
    }

    fn pick(dist: &[f64], u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // u landed in the rounding gap above the cumulative sum.
        dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn start(&self, u: f64) -> usize {
        Self::pick(&self.initial, u)
    }

    pub fn step(&self, from: usize, u: f64) -> usize {
        Self::pick(&self.transition[from], u)
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl Process {
    /// Checks probabilities and row sums; `positive` additionally requires
    /// every emitted value to be strictly positive (channel gains).
    pub fn validate(&self, positive: bool) -> Result<()> {
        let check_value = |v: f64| -> Result<()> {
            let ok = v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(invalid(format!(
                    "process value {v} must be finite and {}",
                    if positive { "positive" } else { "non-negative" }
                )))
            }
        };
        match self {
            Process::Constant { value } => check_value(*value),
            Process::Bernoulli { p, value } => {
                check_prob("Bernoulli p", *p)?;
                if positive && *p < 1.0 {
                    return Err(invalid("a Bernoulli process can emit zero, which is not a valid gain"));
                }
                check_value(*value)
            }
            Process::TwoValue { p, values } => {
                check_prob("two-value p", *p)?;
                values.iter().try_for_each(|&v| check_value(v))
            }
            Process::Markov {
                transition,
                values,
                initial,
            } => {
                for row in transition {
                    for &q in row {
                        check_prob("transition probability", q)?;
                    }
                    if (row[0] + row[1] - 1.0).abs() > ROW_TOL {
                        return Err(invalid(format!(
                            "transition row {row:?} does not sum to 1"
                        )));
                    }
                }
                if let Some(s) = initial {
                    if *s > 1 {
                        return Err(invalid(format!("initial state {s} out of range")));
                    }
                }
                values.iter().try_for_each(|&v| check_value(v))
            }
        }
    }

    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        Ok(match self {
            Process::Constant { .. } => vec![1.0],
            Process::Bernoulli { p, .. } | Process::TwoValue { p, .. } => vec![1.0 - p, *p],
            Process::Markov { transition, .. } => {
                let q01 = transition[0][1];
                let q10 = transition[1][0];
                if q01 + q10 <= 0.0 {
                    return Err(Error::ReducibleChain);
                }
                let pi1 = q01 / (q01 + q10);
                vec![1.0 - pi1, pi1]
            }
        })
    }

    pub fn chain(&self) -> Result<FiniteChain> {
        let stationary = self.stationary_distribution();
        Ok(match self {
            Process::Constant { value } => FiniteChain {
                values: vec![*value],
                initial: vec![1.0],
                transition: vec![vec![1.0]],
            },
            Process::Bernoulli { p, value } => {
                let row = vec![1.0 - p, *p];
                FiniteChain {
                    values: vec![0.0, *value],
                    initial: row.clone(),
                    transition: vec![row.clone(), row],
                }
            }
            Process::TwoValue { p, values } => {
                let row = vec![1.0 - p, *p];
                FiniteChain {
                    values: values.to_vec(),
                    initial: row.clone(),
                    transition: vec![row.clone(), row],
                }
            }
            Process::Markov {
                transition,
                values,
                initial,
            } => {
                let initial = match initial {
                    Some(s) => {
                        let mut d = vec![0.0, 0.0];
                        d[*s] = 1.0;
                        d
                    }
                    None => stationary?,
                };
                FiniteChain {
                    values: values.to_vec(),
                    initial,
                    transition: transition.iter().map(|r| r.to_vec()).collect(),
                }
            }
        })
    }

    /// State index emitting `value`; the first match when values repeat.
    pub fn state_of(&self, value: f64) -> Option<usize> {
        match self {
            Process::Constant { value: v } => (*v == value).then_some(0),
            Process::Bernoulli { value: v, .. } => {
                if value == 0.0 {
                    Some(0)
                } else {
                    (*v == value).then_some(1)
                }
            }
            Process::TwoValue { values, .. } | Process::Markov { values, .. } => {
                values.iter().position(|&v| v == value)
            }
        }
    }

    /// True when the process emits one value with certainty every slot.
    pub fn is_deterministic(&self) -> bool {
        match self {
            Process::Constant { .. } => true,
            Process::Bernoulli { p, value } => *p == 0.0 || *p == 1.0 || *value == 0.0,
            Process::TwoValue { p, values } => *p == 0.0 || *p == 1.0 || values[0] == values[1],
            Process::Markov {
                transition,
                values,
                initial,
            } => {
                values[0] == values[1]
                    || (initial.is_some()
                        && transition.iter().flatten().all(|&q| q == 0.0 || q == 1.0))
            }
        }
    }
}

/// Expected per-slot value under the stationary law.
pub fn stationary_mean(process: &Process) -> Result<f64> {
    let dist = process.stationary_distribution()?;
    let chain_values = match process {
        Process::Constant { value } => vec![*value],
        Process::Bernoulli { value, .. } => vec![0.0, *value],
        Process::TwoValue { values, .. } | Process::Markov { values, .. } => values.to_vec(),
    };
    Ok(dist.iter().zip(&chain_values).map(|(p, v)| p * v).sum())
}

fn default_slot_duration() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModel {
    pub harvest_model: Process,
    pub arrival_model: Process,
    pub channel_model: Process,
    /// Energy stored before the first slot's harvest.
    #[serde(default)]
    pub initial_energy: f64,
    /// Data stored before the first slot's arrival; `None` is an unlimited
    /// backlog.
    #[serde(default)]
    pub initial_data: Option<f64>,
    /// Seconds per slot; only used when reporting rates.
    #[serde(default = "default_slot_duration")]
    pub slot_duration: f64,
    pub horizon: usize,
}

/// Joint exogenous state: (harvest, arrival, channel) chain states.
pub type JointState = [usize; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousPath {
    pub trace: Trace,
    pub states: Vec<JointState>,
}

/// The three chains of a scenario, ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioChains {
    pub chains: [FiniteChain; 3],
}

impl ScenarioChains {
    pub fn value(&self, s: JointState) -> (f64, f64, f64) {
        (
            self.chains[0].values[s[0]],
            self.chains[1].values[s[1]],
            self.chains[2].values[s[2]],
        )
    }

    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> JointState {
        let mut s = [0; 3];
        for (k, c) in self.chains.iter().enumerate() {
            s[k] = c.start(rng.gen());
        }
        s
    }

    pub fn step<R: Rng + ?Sized>(&self, from: JointState, rng: &mut R) -> JointState {
        let mut s = [0; 3];
        for (k, c) in self.chains.iter().enumerate() {
            s[k] = c.step(from[k], rng.gen());
        }
        s
    }

    /// All joint states in lexicographic order.
    pub fn joint_states(&self) -> Vec<JointState> {
        let mut out = Vec::new();
        for a in 0..self.chains[0].n_states() {
            for b in 0..self.chains[1].n_states() {
                for c in 0..self.chains[2].n_states() {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    pub fn initial_prob(&self, s: JointState) -> f64 {
        (0..3).map(|k| self.chains[k].initial[s[k]]).product()
    }

    pub fn transition_prob(&self, from: JointState, to: JointState) -> f64 {
        (0..3)
            .map(|k| self.chains[k].transition[from[k]][to[k]])
            .product()
    }

    /// Sample `len` slots following the joint state `current`, returning the
    /// harvests, arrivals and gains of those slots.
    pub fn continuation<R: Rng + ?Sized>(
        &self,
        current: JointState,
        len: usize,
        rng: &mut R,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut h = Vec::with_capacity(len);
        let mut b = Vec::with_capacity(len);
        let mut g = Vec::with_capacity(len);
        let mut s = current;
        for _ in 0..len {
            s = self.step(s, rng);
            let (x, y, z) = self.value(s);
            h.push(x);
            b.push(y);
            g.push(z);
        }
        (h, b, g)
    }
}

impl ScenarioModel {
    pub fn validate(&self) -> Result<()> {
        self.harvest_model.validate(false)?;
        self.arrival_model.validate(false)?;
        self.channel_model.validate(true)?;
        for p in [&self.harvest_model, &self.arrival_model, &self.channel_model] {
            p.chain()?;
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(invalid("slot_duration must be positive"));
        }
        if !(self.initial_energy.is_finite() && self.initial_energy >= 0.0) {
            return Err(invalid("initial_energy must be finite and non-negative"));
        }
        if let Some(b) = self.initial_data {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid("initial_data must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn with_horizon(&self, horizon: usize) -> ScenarioModel {
        ScenarioModel {
            horizon,
            ..self.clone()
        }
    }

    /// `e_1`, the energy stored before the first harvest.
    pub fn e_1(&self) -> f64 {
        self.initial_energy
    }

    /// `b_1`, infinite for an unlimited backlog.
    pub fn b_1(&self) -> f64 {
        self.initial_data.unwrap_or(f64::INFINITY)
    }

    pub fn chains(&self) -> Result<ScenarioChains> {
        self.validate()?;
        Ok(ScenarioChains {
            chains: [
                self.harvest_model.chain()?,
                self.arrival_model.chain()?,
                self.channel_model.chain()?,
            ],
        })
    }

    pub fn is_deterministic(&self) -> bool {
        self.harvest_model.is_deterministic()
            && self.arrival_model.is_deterministic()
            && self.channel_model.is_deterministic()
    }

    /// Joint chain state consistent with observed values. `None` if some value
    /// cannot be emitted by its process.
    pub fn infer_state(&self, harvest: f64, arrival: f64, gain: f64) -> Option<JointState> {
        Some([
            self.harvest_model.state_of(harvest)?,
            self.arrival_model.state_of(arrival)?,
            self.channel_model.state_of(gain)?,
        ])
    }

    pub fn sample_path(&self, stream: &RngStream) -> Result<ExogenousPath> {
        let chains = self.chains()?;
        let mut rng = stream.rng();
        let n = self.horizon;
        let mut states = Vec::with_capacity(n);
        let mut s = chains.start(&mut rng);
        states.push(s);
        for _ in 1..n {
            s = chains.step(s, &mut rng);
            states.push(s);
        }
        let mut h = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        for &s in &states {
            let (x, y, z) = chains.value(s);
            h.push(x);
            b.push(y);
            g.push(z);
        }
        Ok(ExogenousPath {
            trace: Trace::new(h, b, g)?,
            states,
        })
    }
}

pub fn sample_trace(model: &ScenarioModel, stream: &RngStream) -> Result<Trace> {
    model.sample_path(stream).map(|p| p.trace)
}

pub const PRESET_SCENARIOS: [&str; 4] = ["main", "memory-harvest", "power-halving-comparison", "cdf-figure"];

/// Bits in one 10 KB packet.
pub const PACKET_BITS: f64 = 80_000.0;

fn main_scenario() -> ScenarioModel {
    ScenarioModel {
        harvest_model: Process::Bernoulli { p: 0.5, value: 50.0 },
        arrival_model: Process::Markov {
            transition: [[0.9, 0.1], [0.58, 0.42]],
            values: [0.0, PACKET_BITS],
            initial: None,
        },
        channel_model: Process::TwoValue {
            p: 0.5,
            values: [12.0, 30.0],
        },
        initial_energy: 0.0,
        initial_data: Some(0.0),
        slot_duration: 1e-3,
        horizon: 100,
    }
}

/// The named scenarios of the numerical study.
pub fn preset_scenario(name: &str) -> Result<ScenarioModel> {
    let base = main_scenario();
    Ok(match name {
        "main" => base,
        "memory-harvest" => ScenarioModel {
            harvest_model: Process::Markov {
                transition: [[0.9, 0.1], [0.1, 0.9]],
                values: [0.0, 50.0],
                initial: None,
            },
            ..base
        },
        "power-halving-comparison" => ScenarioModel {
            harvest_model: Process::Bernoulli { p: 0.1, value: 90.0 },
            ..base
        },
        "cdf-figure" => ScenarioModel {
            harvest_model: Process::Bernoulli { p: 0.45, value: 180.0 },
            arrival_model: Process::Constant { value: 0.0 },
            channel_model: Process::Constant { value: 1.0 },
            initial_energy: 88.0,
            initial_data: None,
            slot_duration: 1e-3,
            horizon: 100,
        },
        _ => {
            return Err(Error::UnknownScenario {
                name: name.to_string(),
                valid: PRESET_SCENARIOS.join(", "),
            })
        }
    })
}

pub const TOY_SCENARIOS: [&str; 2] = ["dp-toy", "dp-toy-deterministic"];

/// Small two-state scenario sized for the dynamic program: harvests on a
/// 0.5 grid, arrivals on a 1-bit grid, `N = 8`. The deterministic variant
/// pins every chain to strict alternation.
pub fn dp_toy_scenario(deterministic: bool) -> ScenarioModel {
    let alternating = |values: [f64; 2]| Process::Markov {
        transition: [[0.0, 1.0], [1.0, 0.0]],
        values,
        initial: Some(0),
    };
    let (harvest_model, arrival_model, channel_model) = if deterministic {
        (alternating([0.0, 1.5]), alternating([2.0, 1.0]), alternating([0.5, 2.0]))
    } else {
        (
            Process::Bernoulli { p: 0.5, value: 1.5 },
            Process::TwoValue { p: 0.5, values: [1.0, 2.0] },
            Process::Markov {
                transition: [[0.7, 0.3], [0.3, 0.7]],
                values: [0.5, 2.0],
                initial: None,
            },
        )
    };
    ScenarioModel {
        harvest_model,
        arrival_model,
        channel_model,
        initial_energy: 2.0,
        initial_data: Some(0.0),
        slot_duration: 1e-3,
        horizon: 8,
    }
}

/// A study scenario or one of the toy scenarios, by name.
pub fn named_scenario(name: &str) -> Result<ScenarioModel> {
    match name {
        "dp-toy" => Ok(dp_toy_scenario(false)),
        "dp-toy-deterministic" => Ok(dp_toy_scenario(true)),
        _ => preset_scenario(name).map_err(|_| Error::UnknownScenario {
            name: name.to_string(),
            valid: PRESET_SCENARIOS.iter().chain(&TOY_SCENARIOS).copied().collect::<Vec<_>>().join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(p: f64, value: f64, horizon: usize) -> ScenarioModel {
        ScenarioModel {
            harvest_model: Process::Bernoulli { p, value },
            arrival_model: Process::Constant { value: 0.0 },
            channel_model: Process::Constant { value: 1.0 },
            initial_energy: 0.0,
            initial_data: None,
            slot_duration: 1e-3,
            horizon,
        }
    }

    #[test]
    fn degenerate_bernoulli() {
        let t = sample_trace(&bern(1.0, 50.0, 20), &RngStream::new(1, 0)).unwrap();
        assert!(t.harvests().iter().all(|&h| h == 50.0));
        let t = sample_trace(&bern(0.0, 50.0, 20), &RngStream::new(1, 0)).unwrap();
        assert!(t.harvests().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn stationary_means() {
        assert_eq!(stationary_mean(&Process::Bernoulli { p: 0.5, value: 50.0 }).unwrap(), 25.0);
        assert_eq!(stationary_mean(&Process::Constant { value: 3.0 }).unwrap(), 3.0);
        let m = stationary_mean(&Process::Markov {
            transition: [[0.9, 0.1], [0.58, 0.42]],
            values: [0.0, 1.0],
            initial: None,
        })
        .unwrap();
        assert!((m - 0.1 / 0.68).abs() < 1e-15);
        assert_eq!(
            stationary_mean(&Process::Markov {
                transition: [[1.0, 0.0], [0.0, 1.0]],
                values: [0.0, 1.0],
                initial: None,
            }),
            Err(Error::ReducibleChain)
        );
    }

    #[test]
    fn prefix_consistent_across_horizons() {
        let m = preset_scenario("main").unwrap();
        let s = RngStream::new(9, 2);
        let long = sample_trace(&m.with_horizon(60), &s).unwrap();
        let short = sample_trace(&m.with_horizon(25), &s).unwrap();
        assert_eq!(&long.harvests()[..25], short.harvests());
        assert_eq!(&long.arrivals()[..25], short.arrivals());
        assert_eq!(&long.gains()[..25], short.gains());
    }

    #[test]
    fn preset_scenarios() {
        let main = preset_scenario("main").unwrap();
        assert_eq!(main.harvest_model, Process::Bernoulli { p: 0.5, value: 50.0 });
        assert_eq!(main.horizon, 100);
        let cdf = preset_scenario("cdf-figure").unwrap();
        assert_eq!(cdf.harvest_model, Process::Bernoulli { p: 0.45, value: 180.0 });
        for name in PRESET_SCENARIOS {
            preset_scenario(name).unwrap().validate().unwrap();
        }
        assert!(matches!(preset_scenario("nope"), Err(Error::UnknownScenario { .. })));
    }

    #[test]
    fn validation() {
        let mut m = bern(0.5, 1.0, 5);
        m.channel_model = Process::Bernoulli { p: 0.5, value: 1.0 };
        assert!(m.validate().is_err());
        let mut m = bern(1.5, 1.0, 5);
        assert!(m.validate().is_err());
        m = bern(0.5, 1.0, 5);
        m.arrival_model = Process::Markov {
            transition: [[0.5, 0.4], [0.5, 0.5]],
            values: [0.0, 1.0],
            initial: None,
        };
        assert!(m.validate().is_err());
        m = bern(0.5, 1.0, 0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        for name in PRESET_SCENARIOS {
            let m = preset_scenario(name).unwrap();
            let text = serde_json::to_string(&m).unwrap();
            let back: ScenarioModel = serde_json::from_str(&text).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn pinned_alternating_chain_is_deterministic() {
        let p = Process::Markov {
            transition: [[0.0, 1.0], [1.0, 0.0]],
            values: [1.0, 2.0],
            initial: Some(0),
        };
        assert!(p.is_deterministic());
        let m = ScenarioModel {
            channel_model: p,
            ..bern(1.0, 3.0, 6)
        };
        let t = sample_trace(&m, &RngStream::new(4, 4)).unwrap();
        assert_eq!(t.gains(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }
}
