use serde::Serialize;

use super::NetworkError;

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    name: String,
    states: Vec<String>,
}

impl Variable {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// A discrete Bayesian network.
///
/// Variables and their states keep declaration order. Each variable's
/// parents are ordered by variable declaration order, and CPT rows are
/// indexed by the parents' joint assignment in mixed radix with the last
/// parent varying fastest.
///
/// Construction only checks that names resolve; the probabilistic invariants
/// are reported by [`validate_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    cpts: Vec<Vec<Vec<f64>>>,
    hypothesis: Vec<usize>,
}

impl BayesNet {
    pub fn builder() -> BayesNetBuilder {
        BayesNetBuilder::default()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variable(&self, index: usize) -> &Variable {
        &self.variables[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents(&self, var: usize) -> &[usize] {
        &self.parents[var]
    }

    pub fn cpt(&self, var: usize) -> &[Vec<f64>] {
        &self.cpts[var]
    }

    pub fn cardinality(&self, var: usize) -> usize {
        self.variables[var].states.len()
    }

    /// Designated hypothesis (pathological process) variables.
    pub fn hypothesis_vars(&self) -> &[usize] {
        &self.hypothesis
    }

    /// Number of CPT rows the variable needs: the product of its parents'
    /// state counts.
    pub fn expected_rows(&self, var: usize) -> usize {
        self.parents[var].iter().map(|&p| self.cardinality(p)).product()
    }

    /// Parent state indices for a CPT row index.
    pub fn row_assignment(&self, var: usize, mut row: usize) -> Vec<usize> {
        let parents = &self.parents[var];
        let mut assignment = vec![0; parents.len()];
        for (slot, &p) in parents.iter().enumerate().rev() {
            let card = self.cardinality(p);
            assignment[slot] = row % card;
            row /= card;
        }
        assignment
    }

    /// Human-readable label for a CPT row, e.g. `A=x,B=y`; empty for roots.
    pub fn row_label(&self, var: usize, row: usize) -> String {
        self.parents[var]
            .iter()
            .zip(self.row_assignment(var, row))
            .map(|(&p, s)| format!("{}={}", self.variables[p].name, self.variables[p].states[s]))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// CPT row index for a parent assignment given in parent order.
    pub fn row_index(&self, var: usize, parent_states: impl IntoIterator<Item = usize>) -> usize {
        self.parents[var]
            .iter()
            .zip(parent_states)
            .fold(0, |acc, (&p, s)| acc * self.cardinality(p) + s)
    }

    /// Total number of entries in the full joint table, saturating.
    pub fn joint_size(&self) -> usize {
        self.variables
            .iter()
            .fold(1usize, |acc, v| acc.saturating_mul(v.states.len()))
    }
}

#[derive(Debug, Default)]
pub struct BayesNetBuilder {
    variables: Vec<Variable>,
    edges: Vec<(String, String)>,
    cpts: Vec<(String, Vec<Vec<f64>>)>,
    hypothesis: Vec<String>,
}

impl BayesNetBuilder {
    pub fn variable<S: Into<String>>(
        mut self,
        name: impl Into<String>,
        states: impl IntoIterator<Item = S>,
    ) -> Self {
        self.variables.push(Variable {
            name: name.into(),
            states: states.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn edge(mut self, parent: impl Into<String>, child: impl Into<String>) -> Self {
        self.edges.push((parent.into(), child.into()));
        self
    }

    /// Sets the CPT rows of a variable, in the row order described on
    /// [`BayesNet`].
    pub fn cpt(mut self, variable: impl Into<String>, rows: Vec<Vec<f64>>) -> Self {
        self.cpts.push((variable.into(), rows));
        self
    }

    pub fn hypothesis(mut self, variable: impl Into<String>) -> Self {
        self.hypothesis.push(variable.into());
        self
    }

    pub fn build(self) -> Result<BayesNet, NetworkError> {
        let mut variables: Vec<Variable> = Vec::with_capacity(self.variables.len());
        for var in self.variables {
            if variables.iter().any(|v| v.name == var.name) {
                return Err(NetworkError::DuplicateVariable(var.name));
            }
            if var.states.is_empty() {
                return Err(NetworkError::NoStates(var.name));
            }
            for (i, s) in var.states.iter().enumerate() {
                if var.states[..i].contains(s) {
                    return Err(NetworkError::DuplicateState {
                        variable: var.name.clone(),
                        state: s.clone(),
                    });
                }
            }
            variables.push(var);
        }
        let lookup = |name: &str| {
            variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| NetworkError::UnknownVariable(name.to_string()))
        };

        let mut edges = Vec::with_capacity(self.edges.len());
        let mut parents = vec![Vec::new(); variables.len()];
        for (parent, child) in &self.edges {
            let (p, c) = (lookup(parent)?, lookup(child)?);
            if edges.contains(&(p, c)) {
                return Err(NetworkError::DuplicateEdge {
                    parent: parent.clone(),
                    child: child.clone(),
                });
            }
            edges.push((p, c));
            parents[c].push(p);
        }
        for list in &mut parents {
            list.sort_unstable();
        }

        let mut cpts: Vec<Option<Vec<Vec<f64>>>> = vec![None; variables.len()];
        for (name, rows) in self.cpts {
            let v = lookup(&name)?;
            if cpts[v].is_some() {
                return Err(NetworkError::DuplicateCpt(name));
            }
            cpts[v] = Some(rows);
        }

        let mut hypothesis = Vec::with_capacity(self.hypothesis.len());
        for name in &self.hypothesis {
            let h = lookup(name)?;
            if !hypothesis.contains(&h) {
                hypothesis.push(h);
            }
        }

        Ok(BayesNet {
            variables,
            edges,
            parents,
            // a missing CPT shows up as a row-count violation
            cpts: cpts.into_iter().map(Option::unwrap_or_default).collect(),
            hypothesis,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Cycle,
    RowCount,
    RowLength,
    NegativeEntry,
    RowSum,
}

/// One broken invariant, located by `path` (e.g. `cpts.B[A=x]`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Checks acyclicity and CPT shape/normalization.
pub fn validate_network(net: &BayesNet) -> ValidationReport {
    let mut violations = Vec::new();

    let cyclic = cyclic_variables(net);
    if !cyclic.is_empty() {
        let names: Vec<&str> = cyclic.iter().map(|&v| net.variables[v].name.as_str()).collect();
        violations.push(Violation {
            kind: ViolationKind::Cycle,
            path: "edges".to_string(),
            message: format!("cycle through {}", names.join(", ")),
        });
    }

    for (v, var) in net.variables.iter().enumerate() {
        let rows = &net.cpts[v];
        let expected = net.expected_rows(v);
        if rows.len() != expected {
            violations.push(Violation {
                kind: ViolationKind::RowCount,
                path: format!("cpts.{}", var.name),
                message: format!(
                    "variable `{}` has {} CPT rows, expected {}",
                    var.name,
                    rows.len(),
                    expected
                ),
            });
            continue;
        }
        for (r, row) in rows.iter().enumerate() {
            let path = if net.parents[v].is_empty() {
                format!("cpts.{}", var.name)
            } else {
                format!("cpts.{}[{}]", var.name, net.row_label(v, r))
            };
            if row.len() != var.states.len() {
                violations.push(Violation {
                    kind: ViolationKind::RowLength,
                    path,
                    message: format!(
                        "row has {} entries, expected {}",
                        row.len(),
                        var.states.len()
                    ),
                });
                continue;
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                violations.push(Violation {
                    kind: ViolationKind::NegativeEntry,
                    path: path.clone(),
                    message: format!("row {row:?} has a negative or non-finite entry"),
                });
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= ROW_SUM_TOLERANCE) {
                violations.push(Violation {
                    kind: ViolationKind::RowSum,
                    path,
                    message: format!("row sums to {sum}, expected 1"),
                });
            }
        }
    }

    ValidationReport { violations }
}

/// Variables left over after repeatedly stripping roots (Kahn's algorithm);
/// empty iff the edge set is acyclic.
fn cyclic_variables(net: &BayesNet) -> Vec<usize> {
    let n = net.variables.len();
    let mut indegree: Vec<usize> = net.parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for &(p, c) in &net.edges {
        children[p].push(c);
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(v) = stack.pop() {
        removed[v] = true;
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                stack.push(c);
            }
        }
    }
    (0..n).filter(|&v| !removed[v]).collect()
}
