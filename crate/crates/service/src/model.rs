//! Model files: the JSON document declaring a network, its hypothesis
//! variables, actions and time-dependent utilities, and the validated
//! [`ModelBundle`] built from it.
//!
//! ```json
//! {
//!   "meta": {"name": "desk", "version": "1", "time_unit": "minutes"},
//!   "variables": [{"name": "H", "states": ["hemorrhage", "stable"]}, ...],
//!   "edges": [{"parent": "H", "child": "hypotension"}],
//!   "cpts": {"H": [0.3, 0.7], "hypotension": {"H=hemorrhage": [0.9, 0.1], ...}},
//!   "hypothesis": "H",
//!   "actions": ["transport", "observe"],
//!   "utility": {"transport": {"hemorrhage": {"kind": "constant", "params": {"value": 1}}}},
//!   "contexts": {"bleeding_controlled": {"observe": {"hemorrhage": {...}}}}
//! }
//! ```

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use timecrit::bayes::{validate_network, BayesNet};
use timecrit::tdutility::{UtilityCurve, UtilityModel};

use crate::error::{from_value, parse_json, Detail, ServiceError};

/// The only time unit models may declare.
pub const TIME_UNIT: &str = "minutes";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_unit: Option<String>,
    /// Free-form entries carried through untouched.
    #[serde(flatten)]
    pub extra: IndexMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDecl {
    pub name: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDecl {
    pub parent: String,
    pub child: String,
}

/// A root variable's prior as a bare row, or rows keyed by parent
/// assignment (`"A=x,B=y"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CptDecl {
    Prior(Vec<f64>),
    Rows(IndexMap<String, Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HypothesisDecl {
    One(String),
    Many(Vec<String>),
}

impl HypothesisDecl {
    pub fn names(&self) -> Vec<&str> {
        match self {
            HypothesisDecl::One(h) => vec![h.as_str()],
            HypothesisDecl::Many(hs) => hs.iter().map(String::as_str).collect(),
        }
    }
}

/// Curve cells keyed by action, then hypothesis state. Cells stay raw JSON
/// until assembly so errors can name the offending cell.
pub type CurveTable = IndexMap<String, IndexMap<String, Value>>;

/// The model file document, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default)]
    pub meta: ModelMeta,
    pub variables: Vec<VariableDecl>,
    #[serde(default)]
    pub edges: Vec<EdgeDecl>,
    pub cpts: IndexMap<String, CptDecl>,
    pub hypothesis: HypothesisDecl,
    pub actions: Vec<String>,
    pub utility: CurveTable,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub contexts: IndexMap<String, CurveTable>,
}

/// A validated network with the utility model bound to its primary (first
/// declared) hypothesis variable.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    id: String,
    meta: ModelMeta,
    net: BayesNet,
    utility: UtilityModel,
}

impl ModelBundle {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ServiceError> {
        let file: ModelFile = parse_json(bytes)?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &ModelFile) -> Result<Self, ServiceError> {
        let mut problems = Vec::new();
        if let Some(unit) = &file.meta.time_unit {
            if unit != TIME_UNIT {
                problems.push(detail(
                    "meta.time_unit",
                    format!("time unit `{unit}` is not supported, use `{TIME_UNIT}`"),
                ));
            }
        }
        let net = build_network(file, &mut problems);
        let utility = build_utility(file, &mut problems);
        match (net, utility) {
            (Some(net), Some(utility)) if problems.is_empty() => {
                let mut bundle = ModelBundle {
                    id: String::new(),
                    meta: file.meta.clone(),
                    net,
                    utility,
                };
                bundle.id = content_id(&bundle.to_file());
                Ok(bundle)
            }
            _ => Err(ServiceError::from_details(problems)),
        }
    }

    /// Content-derived id: identical definitions get identical ids.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn net(&self) -> &BayesNet {
        &self.net
    }

    pub fn utility(&self) -> &UtilityModel {
        &self.utility
    }

    /// Names of the hypothesis variables, primary first.
    pub fn hypotheses(&self) -> Vec<&str> {
        self.net
            .hypothesis_vars()
            .iter()
            .map(|&h| self.net.variable(h).name())
            .collect()
    }

    /// Names of the variables that are not hypotheses, in declaration order.
    pub fn findings(&self) -> Vec<&str> {
        self.net
            .variables()
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.net.hypothesis_vars().contains(i))
            .map(|(_, v)| v.name())
            .collect()
    }

    /// Regenerates the model file from the validated definitions.
    pub fn to_file(&self) -> ModelFile {
        let net = &self.net;
        let variables = net
            .variables()
            .iter()
            .map(|v| VariableDecl {
                name: v.name().to_string(),
                states: v.states().to_vec(),
            })
            .collect();
        let edges = net
            .edges()
            .iter()
            .map(|&(p, c)| EdgeDecl {
                parent: net.variable(p).name().to_string(),
                child: net.variable(c).name().to_string(),
            })
            .collect();
        let cpts = (0..net.len())
            .map(|v| {
                let decl = if net.parents(v).is_empty() {
                    CptDecl::Prior(net.cpt(v)[0].clone())
                } else {
                    CptDecl::Rows(
                        net.cpt(v)
                            .iter()
                            .enumerate()
                            .map(|(r, row)| (net.row_label(v, r), row.clone()))
                            .collect(),
                    )
                };
                (net.variable(v).name().to_string(), decl)
            })
            .collect();
        let hypotheses: Vec<String> = self.hypotheses().into_iter().map(String::from).collect();
        let hypothesis = if hypotheses.len() == 1 {
            HypothesisDecl::One(hypotheses[0].clone())
        } else {
            HypothesisDecl::Many(hypotheses)
        };

        let u = &self.utility;
        let cell = |c: &UtilityCurve| serde_json::to_value(c).expect("curves serialize");
        let utility = u
            .actions()
            .iter()
            .enumerate()
            .map(|(a, action)| {
                let row = u
                    .states()
                    .iter()
                    .enumerate()
                    .map(|(s, state)| (state.clone(), cell(u.base_curve(a, s))))
                    .collect();
                (action.clone(), row)
            })
            .collect();
        let contexts = u
            .contexts()
            .iter()
            .map(|ctx| {
                let mut table = CurveTable::new();
                for (a, s, curve) in ctx.overrides() {
                    table
                        .entry(u.actions()[a].clone())
                        .or_default()
                        .insert(u.states()[s].clone(), cell(curve));
                }
                (ctx.name().to_string(), table)
            })
            .collect();

        ModelFile {
            meta: self.meta.clone(),
            variables,
            edges,
            cpts,
            hypothesis,
            actions: u.actions().to_vec(),
            utility,
            contexts,
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.to_file()).expect("model files serialize")
    }
}

fn detail(path: impl Into<String>, message: impl Into<String>) -> Detail {
    Detail {
        path: path.into(),
        message: message.into(),
    }
}

fn content_id(file: &ModelFile) -> String {
    let bytes = serde_json::to_vec(file).expect("model files serialize");
    let digest = Sha256::digest(&bytes);
    format!("m-{}", &format!("{digest:x}")[..16])
}

fn build_network(file: &ModelFile, problems: &mut Vec<Detail>) -> Option<BayesNet> {
    let mut skeleton = BayesNet::builder();
    for v in &file.variables {
        skeleton = skeleton.variable(&v.name, &v.states);
    }
    for e in &file.edges {
        skeleton = skeleton.edge(&e.parent, &e.child);
    }
    let skeleton = match skeleton.build() {
        Ok(net) => net,
        Err(e) => {
            problems.push(detail("variables", e.to_string()));
            return None;
        }
    };

    let mut builder = BayesNet::builder();
    for v in &file.variables {
        builder = builder.variable(&v.name, &v.states);
    }
    for e in &file.edges {
        builder = builder.edge(&e.parent, &e.child);
    }
    let before = problems.len();
    for (name, decl) in &file.cpts {
        let Some(v) = skeleton.index_of(name) else {
            problems.push(detail(format!("cpts.{name}"), format!("unknown variable `{name}`")));
            continue;
        };
        if let Some(rows) = cpt_rows(&skeleton, v, decl, problems) {
            builder = builder.cpt(name, rows);
        }
    }
    for (h, name) in file.hypothesis.names().into_iter().enumerate() {
        if skeleton.index_of(name).is_none() {
            let path = match file.hypothesis {
                HypothesisDecl::One(_) => "hypothesis".to_string(),
                HypothesisDecl::Many(_) => format!("hypothesis[{h}]"),
            };
            problems.push(detail(path, format!("unknown variable `{name}`")));
        }
        builder = builder.hypothesis(name);
    }
    if file.hypothesis.names().is_empty() {
        problems.push(detail("hypothesis", "no hypothesis variable declared"));
    }
    if problems.len() > before {
        return None;
    }
    let net = match builder.build() {
        Ok(net) => net,
        Err(e) => {
            problems.push(detail("cpts", e.to_string()));
            return None;
        }
    };
    let report = validate_network(&net);
    if !report.is_ok() {
        problems.extend(report.violations.into_iter().map(Detail::from));
        return None;
    }
    Some(net)
}

/// Lays out a declared CPT in row order, reporting malformed or missing
/// row keys.
fn cpt_rows(
    net: &BayesNet,
    v: usize,
    decl: &CptDecl,
    problems: &mut Vec<Detail>,
) -> Option<Vec<Vec<f64>>> {
    let name = net.variable(v).name();
    let parents = net.parents(v);
    match decl {
        CptDecl::Prior(row) if parents.is_empty() => Some(vec![row.clone()]),
        CptDecl::Prior(_) => {
            problems.push(detail(
                format!("cpts.{name}"),
                "variable has parents; rows must be keyed by parent assignment",
            ));
            None
        }
        CptDecl::Rows(keyed) => {
            let mut rows: Vec<Option<Vec<f64>>> = vec![None; net.expected_rows(v)];
            let mut ok = true;
            for (key, row) in keyed {
                let path = format!("cpts.{name}[{key}]");
                match parse_row_key(net, v, key) {
                    Ok(index) if rows[index].is_some() => {
                        problems.push(detail(path, "row declared twice"));
                        ok = false;
                    }
                    Ok(index) => rows[index] = Some(row.clone()),
                    Err(message) => {
                        problems.push(detail(path, message));
                        ok = false;
                    }
                }
            }
            for (r, row) in rows.iter().enumerate() {
                if row.is_none() {
                    problems.push(detail(
                        format!("cpts.{name}[{}]", net.row_label(v, r)),
                        "row is missing",
                    ));
                    ok = false;
                }
            }
            ok.then(|| rows.into_iter().flatten().collect())
        }
    }
}

/// Row index for a `A=x,B=y` key; parents may be listed in any order.
fn parse_row_key(net: &BayesNet, v: usize, key: &str) -> Result<usize, String> {
    let parents = net.parents(v);
    let mut states: Vec<Option<usize>> = vec![None; parents.len()];
    for part in key.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (var, state) = part
            .split_once('=')
            .ok_or_else(|| format!("`{part}` is not of the form parent=state"))?;
        let (var, state) = (var.trim(), state.trim());
        let slot = parents
            .iter()
            .position(|&p| net.variable(p).name() == var)
            .ok_or_else(|| format!("`{var}` is not a parent of `{}`", net.variable(v).name()))?;
        let s = net
            .variable(parents[slot])
            .state_index(state)
            .ok_or_else(|| format!("`{var}` has no state `{state}`"))?;
        if states[slot].replace(s).is_some() {
            return Err(format!("`{var}` assigned twice"));
        }
    }
    if let Some(slot) = states.iter().position(Option::is_none) {
        return Err(format!("missing assignment for `{}`", net.variable(parents[slot]).name()));
    }
    Ok(net.row_index(v, states.into_iter().flatten()))
}

/// The utility model over the primary hypothesis; needs only the variable
/// declarations, so its problems are reported alongside network ones.
fn build_utility(file: &ModelFile, problems: &mut Vec<Detail>) -> Option<UtilityModel> {
    let primary = file.hypothesis.names().first().copied()?;
    let hypothesis = file.variables.iter().find(|v| v.name == primary)?;
    let states = &hypothesis.states;
    let before = problems.len();

    if file.actions.is_empty() {
        problems.push(detail("actions", "no actions declared"));
    }
    for (i, action) in file.actions.iter().enumerate() {
        if file.actions[..i].contains(action) {
            problems.push(detail(format!("actions[{i}]"), format!("duplicate action `{action}`")));
        }
    }
    for action in file.utility.keys() {
        if !file.actions.contains(action) {
            problems.push(detail(format!("utility.{action}"), format!("`{action}` is not a declared action")));
        }
    }

    let mut table = Vec::with_capacity(file.actions.len());
    for action in &file.actions {
        let Some(row) = file.utility.get(action) else {
            problems.push(detail(format!("utility.{action}"), "no utility curves for action"));
            continue;
        };
        check_states(row, &format!("utility.{action}"), primary, states, problems);
        let mut curves = Vec::with_capacity(states.len());
        for state in states {
            let path = format!("utility.{action}.{state}");
            match row.get(state) {
                None => problems.push(detail(&path, "missing curve")),
                Some(cell) => {
                    if let Some(curve) = parse_curve(cell, &path, problems) {
                        curves.push(curve);
                    }
                }
            }
        }
        table.push(curves);
    }
    if problems.len() > before {
        return None;
    }
    let mut model = match UtilityModel::new(primary, file.actions.clone(), states.clone(), table) {
        Ok(model) => model,
        Err(e) => {
            let e = ServiceError::from(e);
            problems.push(detail(e.path, e.message));
            return None;
        }
    };

    for (name, overrides) in &file.contexts {
        let mut cells = Vec::new();
        for (action, row) in overrides {
            let prefix = format!("contexts.{name}.{action}");
            if !file.actions.contains(action) {
                problems.push(detail(&prefix, format!("`{action}` is not a declared action")));
                continue;
            }
            check_states(row, &prefix, primary, states, problems);
            for (state, cell) in row {
                if states.contains(state) {
                    if let Some(curve) = parse_curve(cell, &format!("{prefix}.{state}"), problems) {
                        cells.push((action.clone(), state.clone(), curve));
                    }
                }
            }
        }
        if problems.len() > before {
            continue;
        }
        match model.clone().with_context(name, cells) {
            Ok(m) => model = m,
            Err(e) => problems.push(detail(format!("contexts.{name}"), e.to_string())),
        }
    }
    (problems.len() == before).then_some(model)
}

fn check_states(
    row: &IndexMap<String, Value>,
    prefix: &str,
    hypothesis: &str,
    states: &[String],
    problems: &mut Vec<Detail>,
) {
    for state in row.keys() {
        if !states.contains(state) {
            problems.push(detail(
                format!("{prefix}.{state}"),
                format!("`{state}` is not a state of hypothesis `{hypothesis}`"),
            ));
        }
    }
}

fn parse_curve(cell: &Value, path: &str, problems: &mut Vec<Detail>) -> Option<UtilityCurve> {
    let curve: UtilityCurve = match from_value(cell, path) {
        Ok(c) => c,
        Err(e) => {
            problems.push(detail(path, e.message));
            return None;
        }
    };
    if let Err(reason) = curve.validate() {
        problems.push(detail(path, reason));
        return None;
    }
    Some(curve)
}
