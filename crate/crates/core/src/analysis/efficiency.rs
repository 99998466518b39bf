use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offline::{solve_offline, SolverOptions};
use crate::online::{PolicyRunner, PolicySpec};
use crate::processes::{sample_trace, ScenarioModel};
use crate::rate::RateModel;
use crate::rng::RngStream;

use super::{ratio_of_means, Estimate};

/// Per-policy results of a paired experiment. Throughput and energy are
/// per-trace totals divided by the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub throughput: Estimate,
    pub energy: Estimate,
    /// Mean policy total over mean offline total.
    pub efficiency: Estimate,
    /// Offline minus policy, paired.
    pub gap: Estimate,
    /// Raw per-trace totals in replicate order.
    pub totals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub horizon: usize,
    pub offline: PolicySummary,
    pub policies: Vec<PolicySummary>,
}

/// Trace `i` of an experiment is drawn from stream `(seed, 0)` derived by
/// `i`; online policies get stream `(seed, 1)` derived by `i`.
pub fn paired_experiment(
    model: &ScenarioModel,
    specs: &[PolicySpec],
    replicates: usize,
    seed: u64,
) -> Result<ExperimentResult> {
    model.validate()?;
    if replicates == 0 {
        return Err(crate::error::invalid("replicates must be at least 1"));
    }
    let runners: Vec<PolicyRunner> = specs
        .iter()
        .map(|s| PolicyRunner::build(s, Some(model)))
        .collect::<Result<_>>()?;
    let opts = SolverOptions::default();
    let traces = RngStream::new(seed, 0);
    let policy_rng = RngStream::new(seed, 1);

    // rows[i] = [(total, energy) for offline, then each policy]
    let rows: Vec<Vec<(f64, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, f64)>> {
            let trace = sample_trace(model, &traces.derive(i as u64))?;
            let (e_1, b_1) = (model.e_1(), model.b_1());
            let off = solve_offline(&trace, e_1, b_1, &RateModel::Logarithmic, &opts)?;
            let mut row = vec![(off.total_throughput, off.total_energy)];
            for r in &runners {
                let s = r.run(&trace, e_1, b_1, Some(model), policy_rng.derive(i as u64))?;
                row.push((s.total_throughput, s.total_energy));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let n = model.horizon as f64;
    let column = |k: usize| -> (Vec<f64>, Vec<f64>) { rows.iter().map(|r| r[k]).unzip() };
    let (off_tot, off_energy) = column(0);
    let summarise = |name: String, tot: Vec<f64>, energy: Vec<f64>| -> Result<PolicySummary> {
        let per_slot = |xs: &[f64]| xs.iter().map(|x| x / n).collect::<Vec<_>>();
        let efficiency = ratio_of_means(&tot, &off_tot).ok_or(Error::UndefinedEfficiency)?;
        Ok(PolicySummary {
            policy: name,
            throughput: Estimate::from_samples(&per_slot(&tot)),
            energy: Estimate::from_samples(&per_slot(&energy)),
            efficiency,
            gap: Estimate::paired_difference(&off_tot, &tot),
            totals: tot,
        })
    };
    let offline = summarise("offline".into(), off_tot.clone(), off_energy)?;
    let mut policies = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let (tot, energy) = column(k + 1);
        policies.push(summarise(spec.name().to_string(), tot, energy)?);
    }
    Ok(ExperimentResult {
        horizon: model.horizon,
        offline,
        policies,
    })
}

/// Online-offline efficiency of one policy by paired Monte Carlo.
pub fn efficiency_estimate(spec: &PolicySpec, model: &ScenarioModel, replicates: usize, seed: u64) -> Result<Estimate> {
    let r = paired_experiment(model, std::slice::from_ref(spec), replicates, seed)?;
    Ok(r.policies[0].efficiency)
}
