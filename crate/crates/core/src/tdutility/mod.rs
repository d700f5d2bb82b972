//! Time-dependent utility: curve families, utility models over
//! `(action, hypothesis state)` cells with control-context overlays, and
//! expected utility against a posterior.

mod curve;
mod distribution;
mod model;

use thiserror::Error;

pub use curve::UtilityCurve;
pub use distribution::{TimeDistribution, MERGE_TOLERANCE, WEIGHT_TOLERANCE};
pub use model::{eval_utility, expected_utility, ControlContext, UtilityModel};

/// Convenience wrapper over [`UtilityCurve::eval`].
pub fn eval_curve(curve: &UtilityCurve, t: f64) -> Result<f64, UtilityError> {
    curve.eval(t)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UtilityError {
    #[error("time {0} is negative")]
    NegativeTime(f64),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown hypothesis state `{0}`")]
    UnknownState(String),
    #[error("unknown control context `{0}`")]
    UnknownContext(String),
    #[error("model declares no actions")]
    EmptyActions,
    #[error("invalid curve for ({action}, {state}): {reason}")]
    InvalidCurve {
        action: String,
        state: String,
        reason: String,
    },
    #[error("invalid utility model: {0}")]
    InvalidModel(String),
    #[error("invalid time distribution: {0}")]
    InvalidDistribution(String),
    #[error("posterior {found} does not match model hypothesis {expected}")]
    StateMismatch { expected: String, found: String },
}
