//! The experiment document: one JSON object naming a scenario, the policies,
//! the horizons to sweep and the Monte Carlo budget.

use std::path::PathBuf;

use ehsched_core::online::POLICY_NAMES;
use ehsched_core::{named_scenario, PolicySpec, ScenarioModel};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A scenario given inline or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Named(String),
    Model(Box<ScenarioModel>),
}

impl ScenarioRef {
    pub fn resolve(&self) -> CliResult<ScenarioModel> {
        let model = match self {
            ScenarioRef::Named(name) => named_scenario(name)?,
            ScenarioRef::Model(m) => (**m).clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisToggles {
    /// Also write `fill.csv` with the default bound sweep.
    pub fill_bounds: bool,
    /// Also write `cdf.csv` for the scenario's harvest law.
    pub cdfs: bool,
    /// Also write `water_profile.csv` for the first replicate of each horizon.
    pub water_profiles: bool,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioRef,
    #[serde(deserialize_with = "policies")]
    pub policies: Vec<PolicySpec>,
    pub horizons: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub analysis: AnalysisToggles,
}

fn unknown_policy(name: &str) -> String {
    format!("unknown policy '{name}', expected one of: {}", POLICY_NAMES.join(", "))
}

/// Accepts bare names or tagged objects, and names the valid policies when
/// neither matches.
fn policies<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PolicySpec>, D::Error> {
    use serde::de::Error;
    let raw = Vec::<serde_json::Value>::deserialize(d)?;
    raw.into_iter()
        .map(|v| match &v {
            serde_json::Value::String(name) => {
                PolicySpec::from_name(name).map_err(|_| D::Error::custom(unknown_policy(name)))
            }
            serde_json::Value::Object(map) => {
                let kind = map.get("kind").and_then(|k| k.as_str()).unwrap_or("");
                if !POLICY_NAMES.contains(&kind) {
                    return Err(D::Error::custom(unknown_policy(kind)));
                }
                serde_json::from_value(v.clone()).map_err(D::Error::custom)
            }
            other => Err(D::Error::custom(format!("policy must be a name or an object, got {other}"))),
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> CliResult<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.horizons.is_empty() {
            return Err(CliError::config("horizons must not be empty"));
        }
        if self.horizons.contains(&0) {
            return Err(CliError::config("every horizon must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(CliError::config("replicates must be at least 1"));
        }
        self.scenario.resolve()?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("config serializes"))
    }
}

/// SHA-256 of the compact JSON form, in hex.
pub fn hash_json(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
