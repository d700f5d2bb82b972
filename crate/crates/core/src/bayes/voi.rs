use serde::{Deserialize, Serialize};

use super::{posterior, BayesError, BayesNet, Evidence, Posterior};
use crate::ecda::{best_action, DecisionError, DecisionProblem};
use crate::tdutility::UtilityModel;

/// Best action after seeing one outcome of a candidate finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiOutcome {
    pub state: String,
    pub probability: f64,
    pub best_action: String,
    pub expected_utility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiEntry {
    pub variable: String,
    /// Expected value of perfect information about the variable, in utility
    /// units.
    pub evi: f64,
    /// Set when the candidate is already in the evidence; its EVI is 0.
    pub already_observed: bool,
    /// Only outcomes with positive predictive probability are listed.
    pub outcomes: Vec<VoiOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiReport {
    /// Decision time, minutes.
    pub time: f64,
    pub baseline_action: String,
    pub baseline_utility: f64,
    /// Sorted by EVI descending, ties by variable name.
    pub entries: Vec<VoiEntry>,
}

/// Myopic value of information of each candidate finding for the decision
/// over `model`'s actions at time `t`, with free observation.
///
/// `EVI(O) = sum_o p(o | E) max_A EU(A | E, O=o, t) - max_A EU(A | E, t)`
pub fn value_of_information<'c>(
    net: &BayesNet,
    target: &str,
    evidence: &Evidence,
    candidates: impl IntoIterator<Item = &'c str>,
    model: &UtilityModel,
    t: f64,
    context: Option<&str>,
) -> Result<VoiReport, BayesError> {
    if t.is_nan() || t < 0.0 {
        return Err(DecisionError::NegativeTime(t).into());
    }
    let best = |post: &Posterior| -> Result<(String, f64), BayesError> {
        let dp = DecisionProblem::new(post, model)?.with_context(context)?;
        let b = best_action(&dp, t)?;
        Ok((b.action, b.expected_utility))
    };

    let current = posterior(net, target, evidence)?;
    let (baseline_action, baseline_utility) = best(&current)?;

    let mut entries = Vec::new();
    for name in candidates {
        if evidence.contains(name) {
            entries.push(VoiEntry {
                variable: name.to_string(),
                evi: 0.0,
                already_observed: true,
                outcomes: Vec::new(),
            });
            continue;
        }
        let predictive = posterior(net, name, evidence)?;
        let mut outcomes = Vec::new();
        let mut informed = 0.0;
        for (state, &probability) in predictive.states().iter().zip(predictive.weights()) {
            if probability <= 0.0 {
                continue;
            }
            let updated = posterior(net, target, &evidence.clone().with(name, state.as_str()))?;
            let (action, utility) = best(&updated)?;
            informed += probability * utility;
            outcomes.push(VoiOutcome {
                state: state.clone(),
                probability,
                best_action: action,
                expected_utility: utility,
            });
        }
        entries.push(VoiEntry {
            variable: name.to_string(),
            evi: informed - baseline_utility,
            already_observed: false,
            outcomes,
        });
    }
    entries.sort_by(|a, b| b.evi.total_cmp(&a.evi).then_with(|| a.variable.cmp(&b.variable)));

    Ok(VoiReport {
        time: t,
        baseline_action,
        baseline_utility,
        entries,
    })
}
