//! Per-patient sessions: a timestamped finding log over one model bundle,
//! and the byte format used to save and restore them.

use serde::{Deserialize, Serialize};

use timecrit::bayes::Evidence;
use timecrit::tdutility::TimeDistribution;

use crate::error::{parse_json, ErrorCode, ServiceError};
use crate::model::ModelBundle;

/// Tag written into saved sessions.
pub const SESSION_FORMAT: &str = "timecrit.session.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub variable: String,
    pub state: String,
    /// Session clock, minutes.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub id: String,
    pub model: String,
    /// Session clock reading at creation, minutes.
    pub origin: f64,
    /// Process duration already elapsed at the clock origin.
    pub onset: TimeDistribution,
    pub context: Option<String>,
    /// Every posted finding in arrival order, superseded ones included.
    pub log: Vec<Finding>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SavedSession {
    format: String,
    session: Session,
}

impl Session {
    /// Current evidence: the last logged state of each variable.
    pub fn evidence(&self) -> Evidence {
        let mut ev = Evidence::new();
        for f in &self.log {
            ev.observe(&f.variable, &f.state, f.timestamp);
        }
        ev
    }

    /// Latest timestamp in the log, or the origin when it is empty.
    pub fn last_timestamp(&self) -> f64 {
        self.log.last().map_or(self.origin, |f| f.timestamp)
    }

    /// Checks `finding` against the model and the log without recording it.
    pub fn check_finding(&self, bundle: &ModelBundle, finding: &Finding) -> Result<(), ServiceError> {
        let net = bundle.net();
        let var = net
            .index_of(&finding.variable)
            .map(|v| net.variable(v))
            .ok_or_else(|| {
                ServiceError::validation("variable", format!("unknown variable `{}`", finding.variable))
            })?;
        if var.state_index(&finding.state).is_none() {
            return Err(ServiceError::validation(
                "state",
                format!("variable `{}` has no state `{}`", finding.variable, finding.state),
            ));
        }
        if !finding.timestamp.is_finite() {
            return Err(ServiceError::invalid("timestamp", "timestamp must be a finite number"));
        }
        let last = self.last_timestamp();
        if finding.timestamp < last {
            return Err(ServiceError::new(
                ErrorCode::TimestampRegression,
                "timestamp",
                format!("timestamp {} is earlier than the last logged time {last}", finding.timestamp),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let saved = SavedSession {
            format: SESSION_FORMAT.to_string(),
            session: self.clone(),
        };
        serde_json::to_vec_pretty(&saved).expect("sessions serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Session, ServiceError> {
        let saved: SavedSession = parse_json(bytes)?;
        if saved.format != SESSION_FORMAT {
            return Err(ServiceError::new(
                ErrorCode::ParseError,
                "format",
                format!("unsupported session format `{}`", saved.format),
            ));
        }
        let s = saved.session;
        if !s.origin.is_finite() {
            return Err(ServiceError::validation("session.origin", "origin must be finite"));
        }
        let mut last = s.origin;
        for (i, f) in s.log.iter().enumerate() {
            if !(f.timestamp >= last) || !f.timestamp.is_finite() {
                return Err(ServiceError::validation(
                    format!("session.log[{i}].timestamp"),
                    "log timestamps must be non-decreasing and not before the origin",
                ));
            }
            last = f.timestamp;
        }
        Ok(s)
    }
}
