//! Discrete Bayesian networks: representation and validation, exact
//! inference by variable elimination, a brute-force enumeration oracle, and
//! myopic value-of-information ranking of unobserved findings.

mod factor;
mod inference;
mod network;
mod voi;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecda::DecisionError;

pub use inference::{brute_force_posterior, posterior, BRUTE_FORCE_LIMIT};
pub use network::{
    validate_network, BayesNet, BayesNetBuilder, ValidationReport, Variable, Violation,
    ViolationKind, ROW_SUM_TOLERANCE,
};
pub use voi::{value_of_information, VoiEntry, VoiOutcome, VoiReport};

/// Structural problems that prevent a network from being assembled at all.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("variable `{0}` has no states")]
    NoStates(String),
    #[error("variable `{variable}` declares state `{state}` twice")]
    DuplicateState { variable: String, state: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("edge {parent} -> {child} declared twice")]
    DuplicateEdge { parent: String, child: String },
    #[error("variable `{0}` has more than one CPT")]
    DuplicateCpt(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("impossible evidence: the observed findings have zero joint probability")]
    ImpossibleEvidence,
    #[error("joint table has {entries} entries, above the enumeration limit of {limit}")]
    TooLarge { entries: usize, limit: usize },
    #[error("network is invalid ({} violation(s))", .0.len())]
    InvalidNetwork(Vec<Violation>),
    #[error("posterior weights are invalid: {0}")]
    InvalidPosterior(String),
    #[error(transparent)]
    Decision(#[from] DecisionError),
}

/// One observed finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub state: String,
    /// Observation time on the session clock, minutes.
    #[serde(default)]
    pub at: f64,
}

/// Observed findings, at most one per variable.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence {
    entries: BTreeMap<String, Observation>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `variable = state` observed at time 0.
    pub fn with(mut self, variable: impl Into<String>, state: impl Into<String>) -> Self {
        self.observe(variable, state, 0.0);
        self
    }

    /// Records an observation, replacing any earlier one for the variable.
    pub fn observe(&mut self, variable: impl Into<String>, state: impl Into<String>, at: f64) {
        self.entries.insert(
            variable.into(),
            Observation {
                state: state.into(),
                at,
            },
        );
    }

    pub fn remove(&mut self, variable: &str) -> Option<Observation> {
        self.entries.remove(variable)
    }

    pub fn get(&self, variable: &str) -> Option<&Observation> {
        self.entries.get(variable)
    }

    pub fn contains(&self, variable: &str) -> bool {
        self.entries.contains_key(variable)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Observations ordered by variable name.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Observation)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Tolerance on posterior normalization.
pub const POSTERIOR_TOLERANCE: f64 = 1e-9;

/// A distribution over one variable's states, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    target: String,
    states: Vec<String>,
    weights: Vec<f64>,
}

impl Posterior {
    pub fn new(
        target: impl Into<String>,
        states: Vec<String>,
        weights: Vec<f64>,
    ) -> Result<Self, BayesError> {
        if states.len() != weights.len() || states.is_empty() {
            return Err(BayesError::InvalidPosterior(format!(
                "{} states but {} weights",
                states.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(BayesError::InvalidPosterior(format!(
                "weights {weights:?} outside [0, 1]"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > POSTERIOR_TOLERANCE {
            return Err(BayesError::InvalidPosterior(format!("weights sum to {total}")));
        }
        Ok(Posterior {
            target: target.into(),
            states,
            weights,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn probability(&self, state: &str) -> Option<f64> {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.weights[i])
    }

    /// States with their weights, most probable first (ties keep
    /// declaration order).
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut ranked: Vec<(&str, f64)> = self
            .states
            .iter()
            .map(String::as_str)
            .zip(self.weights.iter().copied())
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked
    }
}
