use serde::{Deserialize, Serialize};
use thiserror::Error;

use timecrit::bayes::{BayesError, Violation};
use timecrit::ecda::DecisionError;
use timecrit::tdutility::UtilityError;
use timecrit::triage::PlanError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Malformed JSON or a value of the wrong shape.
    ParseError,
    /// Well-formed input that breaks a model, session or scenario invariant.
    ValidationError,
    NotFound,
    /// A request argument is out of range.
    InvalidRequest,
    /// The finding timestamp is earlier than the last logged one.
    TimestampRegression,
    InfeasibleScenario,
    TooLarge,
    /// Evidence with zero probability under the model.
    ImpossibleEvidence,
    UsageError,
    Internal,
}

/// One located problem in an input document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub path: String,
    pub message: String,
}

/// Error payload shared by the HTTP endpoints and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Error)]
#[error("{message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    /// Location of the problem in the input (dotted path, `[..]` for
    /// CPT rows and list items), empty when not tied to an input field.
    pub path: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<Detail>,
}

impl ServiceError {
    pub fn new(code: ErrorCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError {
            code,
            message: message.into(),
            path: path.into(),
            details: Vec::new(),
        }
    }

    pub fn not_found(kind: &str, id: &str) -> Self {
        Self::new(ErrorCode::NotFound, "", format!("unknown {kind} `{id}`"))
    }

    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(ErrorCode::InvalidRequest, path, message)
    }

    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(ErrorCode::ValidationError, path, message)
    }

    /// A validation error listing every problem; `path` is the first one's.
    pub fn from_details(details: Vec<Detail>) -> Self {
        let message = details
            .iter()
            .map(|d| format!("{}: {}", d.path, d.message))
            .collect::<Vec<_>>()
            .join("; ");
        ServiceError {
            code: ErrorCode::ValidationError,
            message,
            path: details.first().map(|d| d.path.clone()).unwrap_or_default(),
            details,
        }
    }

    /// Prefixes the path with the location of an embedded document.
    pub fn nested(mut self, prefix: &str) -> Self {
        let join = |p: &str| {
            if p.is_empty() {
                prefix.to_string()
            } else if p.starts_with('[') {
                format!("{prefix}{p}")
            } else {
                format!("{prefix}.{p}")
            }
        };
        self.path = join(&self.path);
        for d in &mut self.details {
            d.path = join(&d.path);
        }
        self
    }

    pub fn http_status(&self) -> u16 {
        match self.code {
            ErrorCode::ParseError | ErrorCode::InvalidRequest | ErrorCode::UsageError => 400,
            ErrorCode::NotFound => 404,
            ErrorCode::TimestampRegression => 409,
            ErrorCode::ValidationError
            | ErrorCode::InfeasibleScenario
            | ErrorCode::TooLarge
            | ErrorCode::ImpossibleEvidence => 422,
            ErrorCode::Internal => 500,
        }
    }
}

impl From<Violation> for Detail {
    fn from(v: Violation) -> Self {
        Detail {
            path: v.path,
            message: v.message,
        }
    }
}

/// Deserializes `bytes` as `T`, reporting the failing field path and the
/// line/column of the error.
pub fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ServiceError::new(
            ErrorCode::ParseError,
            if path == "." { String::new() } else { path },
            format!("{inner}"),
        )
    })?;
    Ok(value)
}

/// Like [`parse_json`] for an already-parsed value (no line information).
pub fn from_value<T: serde::de::DeserializeOwned>(
    value: &serde_json::Value,
    path: &str,
) -> Result<T, ServiceError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner_path = e.path().to_string();
        let full = if inner_path == "." {
            path.to_string()
        } else {
            format!("{path}.{inner_path}")
        };
        ServiceError::new(ErrorCode::ParseError, full, e.into_inner().to_string())
    })
}

impl From<UtilityError> for ServiceError {
    fn from(e: UtilityError) -> Self {
        let path = match &e {
            UtilityError::InvalidCurve { action, state, .. } => format!("utility.{action}.{state}"),
            _ => String::new(),
        };
        match e {
            UtilityError::NegativeTime(_) => ServiceError::invalid(path, e.to_string()),
            _ => ServiceError::validation(path, e.to_string()),
        }
    }
}

impl From<DecisionError> for ServiceError {
    fn from(e: DecisionError) -> Self {
        match e {
            DecisionError::Utility(u) => u.into(),
            DecisionError::InvalidTreatment(_) => ServiceError::validation("", e.to_string()),
            _ => ServiceError::invalid("", e.to_string()),
        }
    }
}

impl From<BayesError> for ServiceError {
    fn from(e: BayesError) -> Self {
        match e {
            BayesError::Decision(d) => d.into(),
            BayesError::InvalidNetwork(violations) => {
                ServiceError::from_details(violations.into_iter().map(Detail::from).collect())
            }
            BayesError::ImpossibleEvidence => {
                ServiceError::new(ErrorCode::ImpossibleEvidence, "", e.to_string())
            }
            BayesError::TooLarge { .. } => ServiceError::new(ErrorCode::TooLarge, "", e.to_string()),
            _ => ServiceError::validation("", e.to_string()),
        }
    }
}

impl From<PlanError> for ServiceError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::InfeasibleScenario | PlanError::InfeasiblePlan(_) => {
                ServiceError::new(ErrorCode::InfeasibleScenario, "", e.to_string())
            }
            PlanError::TooLarge { .. } => ServiceError::new(ErrorCode::TooLarge, "", e.to_string()),
            PlanError::MissingLeg { .. } => ServiceError::validation("transport", e.to_string()),
            PlanError::Decision(d) => d.into(),
            PlanError::Utility(u) => u.into(),
            PlanError::InvalidScenario(_) => ServiceError::validation("", e.to_string()),
        }
    }
}
