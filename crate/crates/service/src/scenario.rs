//! Scenario files: patients, transport assets, receiving facilities and
//! travel times, parsed into a [`Scenario`] for plan ranking.
//!
//! Each patient names its model either by a key into the file's inline
//! `models` table or by a reference handed to a [`ModelResolver`] (a store
//! id over HTTP, a file path on the command line).

use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use timecrit::bayes::{posterior, Evidence};
use timecrit::tdutility::TimeDistribution;
use timecrit::triage::{rank_plans, Asset, Facility, Patient, PlanEvaluation, Scenario, TransportModel};

use crate::error::{parse_json, ServiceError};
use crate::model::{ModelBundle, ModelFile};

/// Band used when a scenario or transport leg does not name one.
pub const DEFAULT_BAND: &str = "default";

fn default_band() -> String {
    DEFAULT_BAND.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientDecl {
    pub id: String,
    pub location: String,
    pub model: String,
    /// Observed findings, variable to state.
    #[serde(default)]
    pub findings: IndexMap<String, String>,
    #[serde(default)]
    pub onset: Option<TimeDistribution>,
    #[serde(default)]
    pub requires: Vec<String>,
    #[serde(default)]
    pub context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegDecl {
    pub origin: String,
    pub destination: String,
    #[serde(default = "default_band")]
    pub band: String,
    /// `[[minutes, probability], ...]`
    pub support: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Process duration at plan time, minutes.
    #[serde(default)]
    pub clock: f64,
    /// Time-of-day band selecting the travel-time table.
    #[serde(default = "default_band")]
    pub band: String,
    #[serde(default)]
    pub models: IndexMap<String, ModelFile>,
    pub patients: Vec<PatientDecl>,
    pub assets: Vec<Asset>,
    pub facilities: Vec<Facility>,
    #[serde(default)]
    pub transport: Vec<LegDecl>,
}

/// Resolves model references that are not inline in the scenario file.
pub trait ModelResolver {
    fn resolve(&self, reference: &str) -> Result<Arc<ModelBundle>, ServiceError>;
}

/// A resolver that knows no models.
pub struct NoModels;

impl ModelResolver for NoModels {
    fn resolve(&self, reference: &str) -> Result<Arc<ModelBundle>, ServiceError> {
        Err(ServiceError::not_found("model", reference))
    }
}

impl ScenarioFile {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ServiceError> {
        parse_json(bytes)
    }

    pub fn build(&self, resolver: &dyn ModelResolver) -> Result<Scenario, ServiceError> {
        let mut inline: IndexMap<&str, Arc<ModelBundle>> = IndexMap::new();
        for (key, file) in &self.models {
            let bundle = ModelBundle::from_file(file).map_err(|e| e.nested(&format!("models.{key}")))?;
            inline.insert(key, Arc::new(bundle));
        }

        let mut patients = Vec::with_capacity(self.patients.len());
        for (i, decl) in self.patients.iter().enumerate() {
            let at = format!("patients[{i}]");
            let bundle = match inline.get(decl.model.as_str()) {
                Some(b) => b.clone(),
                None => resolver
                    .resolve(&decl.model)
                    .map_err(|e| ServiceError { path: format!("{at}.model"), ..e })?,
            };
            let mut evidence = Evidence::new();
            for (var, state) in &decl.findings {
                evidence.observe(var, state, self.clock);
            }
            let post = posterior(bundle.net(), bundle.utility().hypothesis(), &evidence)
                .map_err(|e| ServiceError::from(e).nested(&format!("{at}.findings")))?;
            let onset = match &decl.onset {
                Some(d) => d.clone(),
                None => TimeDistribution::point_mass(0.0)?,
            };
            if let Some(ctx) = &decl.context {
                bundle
                    .utility()
                    .context_index(ctx)
                    .map_err(|e| ServiceError::validation(format!("{at}.context"), e.to_string()))?;
            }
            patients.push(Patient {
                id: decl.id.clone(),
                location: decl.location.clone(),
                posterior: post,
                model: Arc::new(bundle.utility().clone()),
                context: decl.context.clone(),
                onset,
                requires: decl.requires.clone(),
            });
        }

        let mut transport = TransportModel::new();
        for (i, leg) in self.transport.iter().enumerate() {
            let travel = TimeDistribution::new(leg.support.clone())
                .map_err(|e| ServiceError::validation(format!("transport[{i}].support"), e.to_string()))?;
            if transport.insert(&leg.origin, &leg.destination, &leg.band, travel).is_some() {
                return Err(ServiceError::validation(
                    format!("transport[{i}]"),
                    format!("leg {} -> {} in band `{}` declared twice", leg.origin, leg.destination, leg.band),
                ));
            }
        }
        Ok(Scenario::new(
            patients,
            self.assets.clone(),
            self.facilities.clone(),
            transport,
            &self.band,
            self.clock,
        )?)
    }
}

/// Parses, validates and ranks every feasible plan, cheapest first.
pub fn evaluate_scenario(bytes: &[u8], resolver: &dyn ModelResolver) -> Result<Vec<PlanEvaluation>, ServiceError> {
    let scenario = ScenarioFile::from_json(bytes)?.build(resolver)?;
    Ok(rank_plans(&scenario)?)
}
