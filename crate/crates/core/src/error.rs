use thiserror::Error;

use crate::buffer::ViolationKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible decision at slot {slot}: {kind} deficit {deficit:.3e}")]
    InfeasibleDecision {
        slot: usize,
        kind: ViolationKind,
        deficit: f64,
    },

    #[error(
        "water-level iteration did not converge at slot {slot} after {iterations} iterations \
         (last iterate {last}, residual {residual:.3e})"
    )]
    NonConvergence {
        slot: usize,
        iterations: usize,
        last: f64,
        residual: f64,
    },

    #[error("horizon {horizon} exceeds the exhaustive-search limit {max}")]
    HorizonTooLarge { horizon: usize, max: usize },

    #[error("{what} needs {requested} entries, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("policy '{0}' needs a scenario model")]
    UnsupportedPolicy(String),

    #[error("efficiency undefined: offline throughput is zero on every replicate")]
    UndefinedEfficiency,

    #[error("unknown scenario '{name}', expected one of: {valid}")]
    UnknownScenario { name: String, valid: String },

    #[error("two-state chain is reducible (q01 + q10 = 0)")]
    ReducibleChain,
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
