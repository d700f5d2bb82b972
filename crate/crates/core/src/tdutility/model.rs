use crate::bayes::Posterior;

use super::{UtilityCurve, UtilityError};

/// A named overlay that replaces a subset of curves while a default state of
/// control persists.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlContext {
    name: String,
    /// `[action][state]`, `None` where the base curve applies.
    overrides: Vec<Vec<Option<UtilityCurve>>>,
}

impl ControlContext {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Overridden cells as `(action index, state index, curve)`.
    pub fn overrides(&self) -> impl Iterator<Item = (usize, usize, &UtilityCurve)> {
        self.overrides.iter().enumerate().flat_map(|(a, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(s, c)| c.as_ref().map(|c| (a, s, c)))
        })
    }
}

/// Time-dependent utility `u(action, hypothesis state, t)` over one
/// hypothesis variable.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityModel {
    hypothesis: String,
    actions: Vec<String>,
    states: Vec<String>,
    /// `[action][state]`
    curves: Vec<Vec<UtilityCurve>>,
    contexts: Vec<ControlContext>,
}

impl UtilityModel {
    /// Builds a model from a dense `[action][state]` curve table.
    pub fn new(
        hypothesis: impl Into<String>,
        actions: Vec<String>,
        states: Vec<String>,
        curves: Vec<Vec<UtilityCurve>>,
    ) -> Result<Self, UtilityError> {
        if actions.is_empty() {
            return Err(UtilityError::EmptyActions);
        }
        if states.is_empty() {
            return Err(UtilityError::InvalidModel("no hypothesis states".into()));
        }
        if let Some(dup) = first_duplicate(&actions) {
            return Err(UtilityError::InvalidModel(format!("duplicate action `{dup}`")));
        }
        if let Some(dup) = first_duplicate(&states) {
            return Err(UtilityError::InvalidModel(format!("duplicate state `{dup}`")));
        }
        if curves.len() != actions.len() {
            return Err(UtilityError::InvalidModel(format!(
                "curve table has {} action rows, expected {}",
                curves.len(),
                actions.len()
            )));
        }
        for (action, row) in actions.iter().zip(&curves) {
            if row.len() != states.len() {
                return Err(UtilityError::InvalidModel(format!(
                    "action `{action}` has {} curves, expected {}",
                    row.len(),
                    states.len()
                )));
            }
            for (state, curve) in states.iter().zip(row) {
                curve.validate().map_err(|reason| UtilityError::InvalidCurve {
                    action: action.clone(),
                    state: state.clone(),
                    reason,
                })?;
            }
        }
        Ok(UtilityModel {
            hypothesis: hypothesis.into(),
            actions,
            states,
            curves,
            contexts: Vec::new(),
        })
    }

    /// Adds a control context overriding the listed `(action, state)` cells.
    pub fn with_context(
        mut self,
        name: impl Into<String>,
        overrides: Vec<(String, String, UtilityCurve)>,
    ) -> Result<Self, UtilityError> {
        let name = name.into();
        if self.contexts.iter().any(|c| c.name == name) {
            return Err(UtilityError::InvalidModel(format!("duplicate context `{name}`")));
        }
        let mut table = vec![vec![None; self.states.len()]; self.actions.len()];
        for (action, state, curve) in overrides {
            let a = self.action_index(&action)?;
            let s = self.state_index(&state)?;
            curve.validate().map_err(|reason| UtilityError::InvalidCurve {
                action: action.clone(),
                state: state.clone(),
                reason,
            })?;
            table[a][s] = Some(curve);
        }
        self.contexts.push(ControlContext {
            name,
            overrides: table,
        });
        Ok(self)
    }

    pub fn hypothesis(&self) -> &str {
        &self.hypothesis
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn contexts(&self) -> &[ControlContext] {
        &self.contexts
    }

    pub fn base_curve(&self, action: usize, state: usize) -> &UtilityCurve {
        &self.curves[action][state]
    }

    pub fn action_index(&self, action: &str) -> Result<usize, UtilityError> {
        self.actions
            .iter()
            .position(|a| a == action)
            .ok_or_else(|| UtilityError::UnknownAction(action.to_string()))
    }

    pub fn state_index(&self, state: &str) -> Result<usize, UtilityError> {
        self.states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| UtilityError::UnknownState(state.to_string()))
    }

    pub fn context_index(&self, context: &str) -> Result<usize, UtilityError> {
        self.contexts
            .iter()
            .position(|c| c.name == context)
            .ok_or_else(|| UtilityError::UnknownContext(context.to_string()))
    }

    /// The curve in force for a cell, honoring a context overlay.
    pub fn curve(&self, action: usize, state: usize, context: Option<usize>) -> &UtilityCurve {
        context
            .and_then(|c| self.contexts[c].overrides[action][state].as_ref())
            .unwrap_or(&self.curves[action][state])
    }

    /// True when every curve, including overlays, is non-increasing in time.
    pub fn is_urgency_class(&self) -> bool {
        self.curves.iter().flatten().all(UtilityCurve::is_non_increasing)
            && self
                .contexts
                .iter()
                .all(|c| c.overrides().all(|(_, _, curve)| curve.is_non_increasing()))
    }

    /// Applies `u -> scale * u + shift` to every curve and overlay.
    pub fn affine(&self, scale: f64, shift: f64) -> UtilityModel {
        let map_row = |row: &Vec<UtilityCurve>| row.iter().map(|c| c.affine(scale, shift)).collect();
        UtilityModel {
            hypothesis: self.hypothesis.clone(),
            actions: self.actions.clone(),
            states: self.states.clone(),
            curves: self.curves.iter().map(map_row).collect(),
            contexts: self
                .contexts
                .iter()
                .map(|c| ControlContext {
                    name: c.name.clone(),
                    overrides: c
                        .overrides
                        .iter()
                        .map(|row| {
                            row.iter()
                                .map(|cell| cell.as_ref().map(|k| k.affine(scale, shift)))
                                .collect()
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Checks that a posterior is over this model's hypothesis variable with
    /// identically ordered states.
    pub fn check_alignment(&self, posterior: &Posterior) -> Result<(), UtilityError> {
        if posterior.target() != self.hypothesis || posterior.states() != self.states.as_slice() {
            return Err(UtilityError::StateMismatch {
                expected: format!("{}{:?}", self.hypothesis, self.states),
                found: format!("{}{:?}", posterior.target(), posterior.states()),
            });
        }
        Ok(())
    }

    /// Index-based expected utility; callers guarantee alignment and `t >= 0`.
    pub(crate) fn expected_utility_at(
        &self,
        weights: &[f64],
        action: usize,
        context: Option<usize>,
        time_for_state: impl Fn(usize) -> f64,
    ) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(s, &w)| w * self.curve(action, s, context).eval_unchecked(time_for_state(s)))
            .sum()
    }
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    names
        .iter()
        .enumerate()
        .find(|(i, n)| names[..*i].contains(n))
        .map(|(_, n)| n.as_str())
}

/// Evaluates `u(action, state, t)`, using the context overlay when it
/// overrides the cell.
pub fn eval_utility(
    model: &UtilityModel,
    action: &str,
    state: &str,
    t: f64,
    context: Option<&str>,
) -> Result<f64, UtilityError> {
    let a = model.action_index(action)?;
    let s = model.state_index(state)?;
    let c = context.map(|name| model.context_index(name)).transpose()?;
    model.curve(a, s, c).eval(t)
}

/// Probability-weighted utility of `action` at time `t` under `posterior`.
pub fn expected_utility(
    posterior: &Posterior,
    model: &UtilityModel,
    action: &str,
    t: f64,
    context: Option<&str>,
) -> Result<f64, UtilityError> {
    model.check_alignment(posterior)?;
    if t.is_nan() || t < 0.0 {
        return Err(UtilityError::NegativeTime(t));
    }
    let a = model.action_index(action)?;
    let c = context.map(|name| model.context_index(name)).transpose()?;
    Ok(model.expected_utility_at(posterior.weights(), a, c, |_| t))
}
