//! In-memory model and session store behind the HTTP endpoints.
//!
//! Model bundles are immutable once loaded. Each session sits behind its own
//! mutex, so findings posted to one session are applied in arrival order
//! while other sessions proceed independently; reads clone the session under
//! the lock and compute outside it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use timecrit::ecda::{LoadAndGoReport, TreatmentOption};
use timecrit::tdutility::TimeDistribution;
use timecrit::triage::PlanEvaluation;

use crate::assessment::{self, Assessment, AssessmentRequest};
use crate::error::ServiceError;
use crate::model::ModelBundle;
use crate::scenario::{self, ModelResolver};
use crate::session::{Finding, Session};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    pub model: String,
    #[serde(default)]
    pub onset: Option<TimeDistribution>,
    #[serde(default)]
    pub context: Option<String>,
    /// Session clock reading at creation, minutes; 0 when omitted.
    #[serde(default)]
    pub origin: Option<f64>,
}

impl NewSession {
    pub fn for_model(model: impl Into<String>) -> Self {
        NewSession {
            model: model.into(),
            ..Default::default()
        }
    }
}

#[derive(Default)]
pub struct Store {
    models: RwLock<HashMap<String, Arc<ModelBundle>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses and validates a model file; loading identical definitions
    /// again returns the existing id.
    pub fn load_model(&self, bytes: &[u8]) -> Result<String, ServiceError> {
        let bundle = ModelBundle::from_json(bytes)?;
        Ok(self.insert_model(bundle))
    }

    pub fn insert_model(&self, bundle: ModelBundle) -> String {
        let id = bundle.id().to_string();
        self.models
            .write()
            .expect("model map lock")
            .entry(id.clone())
            .or_insert_with(|| Arc::new(bundle));
        id
    }

    pub fn model(&self, id: &str) -> Result<Arc<ModelBundle>, ServiceError> {
        self.models
            .read()
            .expect("model map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::not_found("model", id))
    }

    pub fn create_session(&self, request: NewSession) -> Result<String, ServiceError> {
        let bundle = self.model(&request.model)?;
        if let Some(ctx) = &request.context {
            bundle
                .utility()
                .context_index(ctx)
                .map_err(|e| ServiceError::validation("context", e.to_string()))?;
        }
        let origin = request.origin.unwrap_or(0.0);
        if !origin.is_finite() {
            return Err(ServiceError::invalid("origin", "origin must be finite"));
        }
        let session = Session {
            id: new_session_id(),
            model: request.model,
            origin,
            onset: match request.onset {
                Some(d) => d,
                None => TimeDistribution::point_mass(0.0)?,
            },
            context: request.context,
            log: Vec::new(),
        };
        Ok(self.insert_session(session))
    }

    fn insert_session(&self, mut session: Session) -> String {
        let mut sessions = self.sessions.write().expect("session map lock");
        while sessions.contains_key(&session.id) {
            session.id = new_session_id();
        }
        let id = session.id.clone();
        sessions.insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::not_found("session", id))
    }

    /// A consistent copy of the session's current state.
    pub fn session(&self, id: &str) -> Result<Session, ServiceError> {
        Ok(self.handle(id)?.lock().expect("session lock").clone())
    }

    /// Appends a finding and returns the assessment at its timestamp. A
    /// rejected finding leaves the log untouched.
    pub fn post_finding(&self, id: &str, finding: Finding) -> Result<Assessment, ServiceError> {
        let handle = self.handle(id)?;
        let snapshot = {
            let mut session = handle.lock().expect("session lock");
            let bundle = self.model(&session.model)?;
            session.check_finding(&bundle, &finding)?;
            session.log.push(finding.clone());
            session.clone()
        };
        let bundle = self.model(&snapshot.model)?;
        assessment::assess(&bundle, &snapshot, &AssessmentRequest::at(finding.timestamp))
    }

    pub fn get_assessment(&self, id: &str, request: &AssessmentRequest) -> Result<Assessment, ServiceError> {
        let session = self.session(id)?;
        let bundle = self.model(&session.model)?;
        assessment::assess(&bundle, &session, request)
    }

    /// Load-and-go evaluation at `now`, defaulting to the latest logged time.
    pub fn load_and_go(
        &self,
        id: &str,
        treatment: &TreatmentOption,
        now: Option<f64>,
    ) -> Result<LoadAndGoReport, ServiceError> {
        let session = self.session(id)?;
        let bundle = self.model(&session.model)?;
        let now = now.unwrap_or_else(|| session.last_timestamp());
        assessment::load_and_go(&bundle, &session, treatment, now)
    }

    pub fn save_session(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        Ok(self.session(id)?.to_bytes())
    }

    /// Restores a saved session; a fresh id is assigned when the saved one
    /// is already taken.
    pub fn load_session(&self, bytes: &[u8]) -> Result<String, ServiceError> {
        let session = Session::from_bytes(bytes)?;
        let bundle = self
            .model(&session.model)
            .map_err(|e| ServiceError { path: "session.model".into(), ..e })?;
        let mut replay = Session {
            log: Vec::new(),
            ..session.clone()
        };
        for (i, f) in session.log.iter().enumerate() {
            replay
                .check_finding(&bundle, f)
                .map_err(|e| e.nested(&format!("session.log[{i}]")))?;
            replay.log.push(f.clone());
        }
        if let Some(ctx) = &session.context {
            bundle
                .utility()
                .context_index(ctx)
                .map_err(|e| ServiceError::validation("session.context", e.to_string()))?;
        }
        Ok(self.insert_session(session))
    }

    pub fn evaluate_scenario(&self, bytes: &[u8]) -> Result<Vec<PlanEvaluation>, ServiceError> {
        scenario::evaluate_scenario(bytes, self)
    }
}

impl ModelResolver for Store {
    fn resolve(&self, reference: &str) -> Result<Arc<ModelBundle>, ServiceError> {
        self.model(reference)
    }
}

fn new_session_id() -> String {
    format!("s-{}", Uuid::new_v4())
}
