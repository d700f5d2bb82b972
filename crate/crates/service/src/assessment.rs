//! Assessment assembly: everything the console shows for one session at one
//! clock reading, computed from the session's current evidence.
//!
//! Times follow the session clock. With `elapsed = now - origin`:
//! best action, expected utilities, criticality and VOI are evaluated at
//! process time `elapsed`; ECDA samples compare acting at `elapsed` against
//! acting at `elapsed + delay`; the onset-aware figures shift the session's
//! onset belief by `elapsed`; load-and-go compares against ideal action at
//! process onset.

use serde::{Deserialize, Serialize};

use timecrit::bayes::{posterior, value_of_information, Posterior, VoiReport};
use timecrit::ecda::{
    best_action, comprehensive_ecda, criticality, ecda, ecda_transport, ecda_with_duration_uncertainty,
    evaluate_load_and_go, BestAction, DecisionProblem, LoadAndGoReport, TreatmentOption,
    DEFAULT_CRITICALITY_STEP,
};
use timecrit::tdutility::TimeDistribution;

use crate::error::ServiceError;
use crate::model::ModelBundle;
use crate::session::{Finding, Session};

/// Delay grid used when a request does not give one, minutes.
pub const DEFAULT_GRID: [f64; 7] = [0.0, 5.0, 10.0, 15.0, 30.0, 60.0, 120.0];

fn default_grid() -> Vec<f64> {
    DEFAULT_GRID.to_vec()
}

/// A candidate transport route with its travel-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub name: String,
    pub travel: TimeDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessmentRequest {
    /// Session clock reading, minutes.
    pub now: f64,
    #[serde(default = "default_grid")]
    pub grid: Vec<f64>,
    #[serde(default)]
    pub treatment: Option<TreatmentOption>,
    #[serde(default)]
    pub routes: Vec<Route>,
}

impl AssessmentRequest {
    pub fn at(now: f64) -> Self {
        AssessmentRequest {
            now,
            grid: default_grid(),
            treatment: None,
            routes: Vec::new(),
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProbability {
    pub state: String,
    pub probability: f64,
}

/// Posterior over one hypothesis variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Differential {
    pub variable: String,
    /// Declaration order.
    pub states: Vec<StateProbability>,
    /// Most probable first; ties keep declaration order.
    pub ranked: Vec<StateProbability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionUtility {
    pub action: String,
    pub expected_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySample {
    pub delay: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCost {
    pub route: String,
    pub ecda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub session: String,
    pub model: String,
    pub now: f64,
    /// Process time of the assessment, `now - origin`.
    pub elapsed: f64,
    pub context: Option<String>,
    /// Current evidence, in variable declaration order.
    pub evidence: Vec<Finding>,
    /// One entry per hypothesis variable, primary first.
    pub differentials: Vec<Differential>,
    /// Hypothesis variable the decision quantities refer to.
    pub hypothesis: String,
    pub best_action: BestAction,
    pub expected_utilities: Vec<ActionUtility>,
    /// ECDA of waiting `delay` more minutes before acting.
    pub ecda: Vec<DelaySample>,
    /// Utility lost per minute of delay at `elapsed`.
    pub criticality: f64,
    pub voi: VoiReport,
    pub onset: TimeDistribution,
    /// Loss already incurred relative to acting at process onset.
    pub comprehensive_ecda: f64,
    /// ECDA over the delay grid with the process duration uncertain.
    pub ecda_duration_uncertain: Vec<DelaySample>,
    pub load_and_go: Option<LoadAndGoReport>,
    pub transport: Vec<RouteCost>,
}

pub(crate) fn differential(p: &Posterior) -> Differential {
    let pair = |(s, w): (&str, f64)| StateProbability {
        state: s.to_string(),
        probability: w,
    };
    Differential {
        variable: p.target().to_string(),
        states: p
            .states()
            .iter()
            .zip(p.weights())
            .map(|(s, &w)| pair((s.as_str(), w)))
            .collect(),
        ranked: p.ranked().into_iter().map(pair).collect(),
    }
}

fn elapsed(session: &Session, now: f64) -> Result<f64, ServiceError> {
    if !now.is_finite() || now < session.origin {
        return Err(ServiceError::invalid(
            "now",
            format!("now = {now} must be a finite time not before the session origin {}", session.origin),
        ));
    }
    Ok(now - session.origin)
}

fn check_grid(grid: &[f64]) -> Result<(), ServiceError> {
    for (i, &d) in grid.iter().enumerate() {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(ServiceError::invalid(format!("grid[{i}]"), format!("delay {d} must be >= 0")));
        }
        if i > 0 && d < grid[i - 1] {
            return Err(ServiceError::invalid(format!("grid[{i}]"), "grid must be sorted ascending"));
        }
    }
    Ok(())
}

/// Posterior over the primary hypothesis under the session's evidence.
pub fn primary_posterior(bundle: &ModelBundle, session: &Session) -> Result<Posterior, ServiceError> {
    Ok(posterior(bundle.net(), bundle.utility().hypothesis(), &session.evidence())?)
}

pub fn assess(
    bundle: &ModelBundle,
    session: &Session,
    request: &AssessmentRequest,
) -> Result<Assessment, ServiceError> {
    let t = elapsed(session, request.now)?;
    check_grid(&request.grid)?;
    let net = bundle.net();
    let model = bundle.utility();
    let evidence = session.evidence();

    let differentials = bundle
        .hypotheses()
        .into_iter()
        .map(|h| posterior(net, h, &evidence).map(|p| differential(&p)))
        .collect::<Result<Vec<_>, _>>()?;
    let post = posterior(net, model.hypothesis(), &evidence)?;
    let dp = DecisionProblem::new(&post, model)?
        .with_context(session.context.as_deref())?
        .with_reference_time(t)?;

    let best = best_action(&dp, t)?;
    let expected_utilities = model
        .actions()
        .iter()
        .zip(dp.expected_utilities(t)?)
        .map(|(a, u)| ActionUtility {
            action: a.clone(),
            expected_utility: u,
        })
        .collect();
    let ecda_samples = request
        .grid
        .iter()
        .map(|&d| Ok(DelaySample { delay: d, value: ecda(&dp, t + d)? }))
        .collect::<Result<Vec<_>, ServiceError>>()?;
    let crit = criticality(&dp, t, DEFAULT_CRITICALITY_STEP)?;

    let candidates: Vec<&str> = bundle
        .findings()
        .into_iter()
        .filter(|f| !evidence.contains(f))
        .collect();
    let voi = value_of_information(net, model.hypothesis(), &evidence, candidates, model, t, dp.context())?;

    let onset_now = session.onset.shifted(t)?;
    let comprehensive = comprehensive_ecda(&dp, &onset_now)?;
    let uncertain = request
        .grid
        .iter()
        .map(|&d| {
            Ok(DelaySample {
                delay: d,
                value: ecda_with_duration_uncertainty(&dp, &onset_now, d)?,
            })
        })
        .collect::<Result<Vec<_>, ServiceError>>()?;

    let load_and_go = request
        .treatment
        .as_ref()
        .map(|treatment| evaluate_load_and_go(&dp.with_reference_time(0.0)?, treatment, t))
        .transpose()?;
    let transport = request
        .routes
        .iter()
        .map(|route| {
            Ok(RouteCost {
                route: route.name.clone(),
                ecda: ecda_transport(&dp, &route.travel.shifted(t)?)?,
            })
        })
        .collect::<Result<Vec<_>, ServiceError>>()?;

    let mut current: Vec<Finding> = evidence
        .iter()
        .map(|(v, o)| Finding {
            variable: v.to_string(),
            state: o.state.clone(),
            timestamp: o.at,
        })
        .collect();
    current.sort_by_key(|f| net.index_of(&f.variable));

    Ok(Assessment {
        session: session.id.clone(),
        model: bundle.id().to_string(),
        now: request.now,
        elapsed: t,
        context: session.context.clone(),
        evidence: current,
        differentials,
        hypothesis: model.hypothesis().to_string(),
        best_action: best,
        expected_utilities,
        ecda: ecda_samples,
        criticality: crit,
        voi,
        onset: session.onset.clone(),
        comprehensive_ecda: comprehensive,
        ecda_duration_uncertain: uncertain,
        load_and_go,
        transport,
    })
}

/// Treat-locally versus load-and-go at clock reading `now`, measured
/// against ideal action at process onset.
pub fn load_and_go(
    bundle: &ModelBundle,
    session: &Session,
    treatment: &TreatmentOption,
    now: f64,
) -> Result<LoadAndGoReport, ServiceError> {
    let t = elapsed(session, now)?;
    let post = primary_posterior(bundle, session)?;
    let dp = DecisionProblem::new(&post, bundle.utility())?.with_context(session.context.as_deref())?;
    Ok(evaluate_load_and_go(&dp, treatment, t)?)
}
