//! Expected cost of delayed action.
//!
//! All measures are built on the best-action expected utility
//! `EU*(t) = max_A sum_j p(H_j | E) u(A, H_j, t)` with the posterior held
//! fixed across every time at which it is evaluated. Times are durations of
//! the pathological process in minutes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::Posterior;
use crate::tdutility::{TimeDistribution, UtilityError, UtilityModel};

/// Default forward-difference step for [`criticality`], minutes.
pub const DEFAULT_CRITICALITY_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecisionError {
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("time {t} is before the reference time {reference}")]
    BeforeReference { t: f64, reference: f64 },
    #[error("time {0} is negative")]
    NegativeTime(f64),
    #[error("delay {0} is negative")]
    NegativeDelay(f64),
    #[error("step {0} must be positive")]
    NonPositiveStep(f64),
    #[error("invalid action predictor: {0}")]
    InvalidPredictor(String),
    #[error("invalid treatment option: {0}")]
    InvalidTreatment(String),
}

/// A posterior and utility model evaluated relative to a reference time.
#[derive(Debug, Clone, Copy)]
pub struct DecisionProblem<'a> {
    posterior: &'a Posterior,
    model: &'a UtilityModel,
    context: Option<usize>,
    reference_time: f64,
}

impl<'a> DecisionProblem<'a> {
    pub fn new(posterior: &'a Posterior, model: &'a UtilityModel) -> Result<Self, DecisionError> {
        model.check_alignment(posterior)?;
        Ok(DecisionProblem {
            posterior,
            model,
            context: None,
            reference_time: 0.0,
        })
    }

    /// Evaluates utilities under a named default control context.
    pub fn with_context(mut self, context: Option<&str>) -> Result<Self, DecisionError> {
        self.context = context.map(|c| self.model.context_index(c)).transpose()?;
        Ok(self)
    }

    /// Sets the reference time `t_o` of immediate action.
    pub fn with_reference_time(mut self, reference_time: f64) -> Result<Self, DecisionError> {
        check_time(reference_time)?;
        self.reference_time = reference_time;
        Ok(self)
    }

    pub fn posterior(&self) -> &'a Posterior {
        self.posterior
    }

    pub fn model(&self) -> &'a UtilityModel {
        self.model
    }

    pub fn context(&self) -> Option<&'a str> {
        self.context.map(|c| self.model.contexts()[c].name())
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    /// Expected utility of every action at `t`, in declaration order.
    pub fn expected_utilities(&self, t: f64) -> Result<Vec<f64>, DecisionError> {
        check_time(t)?;
        Ok(self.utilities_with(|_| t))
    }

    fn utilities_with(&self, time_for_state: impl Fn(usize) -> f64 + Copy) -> Vec<f64> {
        (0..self.model.actions().len())
            .map(|a| {
                self.model
                    .expected_utility_at(self.posterior.weights(), a, self.context, time_for_state)
            })
            .collect()
    }

    fn best_with(&self, time_for_state: impl Fn(usize) -> f64 + Copy) -> (usize, f64) {
        argmax(&self.utilities_with(time_for_state))
    }

    /// `EU*(t)` without argument checks.
    fn best_value(&self, t: f64) -> f64 {
        self.best_with(|_| t).1
    }
}

fn check_time(t: f64) -> Result<(), DecisionError> {
    if t.is_nan() || t < 0.0 || t.is_infinite() {
        return Err(DecisionError::NegativeTime(t));
    }
    Ok(())
}

/// First index of the maximum; earlier declaration wins ties.
fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestAction {
    pub index: usize,
    pub action: String,
    pub expected_utility: f64,
}

/// The action maximizing expected utility at `t`.
pub fn best_action(dp: &DecisionProblem<'_>, t: f64) -> Result<BestAction, DecisionError> {
    check_time(t)?;
    let (index, expected_utility) = dp.best_with(|_| t);
    Ok(BestAction {
        index,
        action: dp.model.actions()[index].clone(),
        expected_utility,
    })
}

fn check_after_reference(dp: &DecisionProblem<'_>, t: f64) -> Result<(), DecisionError> {
    check_time(t)?;
    if t < dp.reference_time {
        return Err(DecisionError::BeforeReference {
            t,
            reference: dp.reference_time,
        });
    }
    Ok(())
}

/// `EU*(t_o) - EU*(t)`: the loss from delaying ideal action until `t`.
pub fn ecda(dp: &DecisionProblem<'_>, t: f64) -> Result<f64, DecisionError> {
    check_after_reference(dp, t)?;
    Ok(dp.best_value(dp.reference_time) - dp.best_value(t))
}

/// Loss measured from process onset: `sum_d p(d) [EU*(0) - EU*(d)]` where
/// `d` is the elapsed duration at the moment of immediate action.
pub fn comprehensive_ecda(
    dp: &DecisionProblem<'_>,
    onset: &TimeDistribution,
) -> Result<f64, DecisionError> {
    let at_onset = dp.best_value(0.0);
    Ok(onset.expect(|d| at_onset - dp.best_value(d)))
}

/// Cost of a further delay `delay` when the process has already run for an
/// uncertain duration: `sum_d p(d) [EU*(d) - EU*(d + delay)]`.
pub fn ecda_with_duration_uncertainty(
    dp: &DecisionProblem<'_>,
    onset: &TimeDistribution,
    delay: f64,
) -> Result<f64, DecisionError> {
    if delay.is_nan() || delay < 0.0 {
        return Err(DecisionError::NegativeDelay(delay));
    }
    Ok(onset.expect(|d| dp.best_value(d) - dp.best_value(d + delay)))
}

/// Distribution over the actions that will actually be taken after delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionPredictor {
    PointMass { action: String },
    Uniform,
    /// Softmax over delayed-time expected utilities; small temperatures
    /// approach the optimal action.
    Softmax { temperature: f64 },
}

impl ActionPredictor {
    /// Probabilities over the model's actions, evaluated at time `t`.
    pub fn distribution(&self, dp: &DecisionProblem<'_>, t: f64) -> Result<Vec<f64>, DecisionError> {
        let n = dp.model.actions().len();
        match self {
            ActionPredictor::PointMass { action } => {
                let index = dp.model.action_index(action)?;
                let mut p = vec![0.0; n];
                p[index] = 1.0;
                Ok(p)
            }
            ActionPredictor::Uniform => Ok(vec![1.0 / n as f64; n]),
            ActionPredictor::Softmax { temperature } => {
                if !(*temperature > 0.0) || !temperature.is_finite() {
                    return Err(DecisionError::InvalidPredictor(format!(
                        "softmax temperature {temperature} must be positive"
                    )));
                }
                let eu = dp.expected_utilities(t)?;
                let max = eu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let raw: Vec<f64> = eu.iter().map(|&u| ((u - max) / temperature).exp()).collect();
                let z: f64 = raw.iter().sum();
                Ok(raw.into_iter().map(|r| r / z).collect())
            }
        }
    }
}

/// Expected cost of delay and misdiagnosis:
/// `EU*(t_o) - sum_i p(A_i) EU(A_i, t)`.
pub fn ecdm(
    dp: &DecisionProblem<'_>,
    predictor: &ActionPredictor,
    t: f64,
) -> Result<f64, DecisionError> {
    check_after_reference(dp, t)?;
    let probabilities = predictor.distribution(dp, t)?;
    let delayed: f64 = probabilities
        .iter()
        .zip(dp.expected_utilities(t)?)
        .map(|(p, u)| p * u)
        .sum();
    Ok(dp.best_value(dp.reference_time) - delayed)
}

/// Rate at which the best action's expected utility is falling at `t`,
/// utility per minute, by forward difference over `step`.
pub fn criticality(dp: &DecisionProblem<'_>, t: f64, step: f64) -> Result<f64, DecisionError> {
    check_time(t)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(DecisionError::NonPositiveStep(step));
    }
    Ok((dp.best_value(t) - dp.best_value(t + step)) / step)
}

/// Expected loss over an uncertain arrival time:
/// `sum_t p(t) [EU*(t_o) - EU*(t)]` with atoms given as absolute times.
pub fn ecda_transport(
    dp: &DecisionProblem<'_>,
    travel: &TimeDistribution,
) -> Result<f64, DecisionError> {
    let now = dp.best_value(dp.reference_time);
    Ok(travel.expect(|t| now - dp.best_value(t)))
}

/// Equivalent time a local treatment removes from a process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRemoved {
    /// A fixed number of minutes.
    Constant(f64),
    /// A fraction of the process duration at treatment time.
    Proportional(f64),
}

impl TimeRemoved {
    fn at(self, t: f64) -> f64 {
        match self {
            TimeRemoved::Constant(minutes) => minutes,
            TimeRemoved::Proportional(fraction) => fraction * t,
        }
    }
}

/// A local stabilization strategy considered against load-and-go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentOption {
    pub name: String,
    /// Minutes needed to administer the treatment on site.
    pub admin_time: f64,
    /// Per hypothesis state; states not listed gain nothing.
    #[serde(default)]
    pub time_removed: BTreeMap<String, TimeRemoved>,
}

impl TreatmentOption {
    pub fn validate(&self, model: &UtilityModel) -> Result<(), DecisionError> {
        if !(self.admin_time >= 0.0) || !self.admin_time.is_finite() {
            return Err(DecisionError::InvalidTreatment(format!(
                "admin time {} must be a non-negative number",
                self.admin_time
            )));
        }
        for (state, removed) in &self.time_removed {
            model.state_index(state)?;
            let ok = match *removed {
                TimeRemoved::Constant(m) => m >= 0.0 && m.is_finite(),
                TimeRemoved::Proportional(f) => (0.0..=1.0).contains(&f),
            };
            if !ok {
                return Err(DecisionError::InvalidTreatment(format!(
                    "time removed for `{state}` is out of range: {removed:?}"
                )));
            }
        }
        Ok(())
    }

    fn removed_for(&self, state: &str, t: f64) -> f64 {
        self.time_removed.get(state).map_or(0.0, |r| r.at(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    LoadAndGo,
    TreatLocally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadAndGoReport {
    pub treatment: String,
    pub ecda_load_and_go: f64,
    pub ecda_with_treatment: f64,
    /// Effective process duration per hypothesis state under treatment.
    pub effective_times: Vec<(String, f64)>,
    pub best_action_with_treatment: String,
    pub recommendation: Recommendation,
}

/// Compares transporting at `t` against treating locally first. Under
/// treatment each hypothesis state's effective duration is
/// `t - t_e(state) + admin_time`, never earlier than the reference time.
/// Ties favour load-and-go.
pub fn evaluate_load_and_go(
    dp: &DecisionProblem<'_>,
    treatment: &TreatmentOption,
    t: f64,
) -> Result<LoadAndGoReport, DecisionError> {
    check_after_reference(dp, t)?;
    treatment.validate(dp.model)?;
    let reference = dp.reference_time;
    let effective: Vec<f64> = dp
        .model
        .states()
        .iter()
        .map(|s| (t - treatment.removed_for(s, t) + treatment.admin_time).max(reference))
        .collect();

    let ecda_load_and_go = ecda(dp, t)?;
    let (best, treated) = dp.best_with(|s| effective[s]);
    let ecda_with_treatment = dp.best_value(reference) - treated;

    let recommendation = if ecda_with_treatment < ecda_load_and_go {
        Recommendation::TreatLocally
    } else {
        Recommendation::LoadAndGo
    };
    Ok(LoadAndGoReport {
        treatment: treatment.name.clone(),
        ecda_load_and_go,
        ecda_with_treatment,
        effective_times: dp.model.states().iter().cloned().zip(effective).collect(),
        best_action_with_treatment: dp.model.actions()[best].clone(),
        recommendation,
    })
}
