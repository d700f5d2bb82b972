use super::factor::Factor;
use super::{validate_network, BayesError, BayesNet, Evidence, Posterior};

/// Largest joint table [`brute_force_posterior`] will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 1 << 20;

struct Query {
    target: usize,
    /// `(variable, state)` in variable order, target excluded
    observed: Vec<(usize, usize)>,
    target_observed: Option<usize>,
}

fn resolve(net: &BayesNet, target: &str, evidence: &Evidence) -> Result<Query, BayesError> {
    let report = validate_network(net);
    if !report.is_ok() {
        return Err(BayesError::InvalidNetwork(report.violations));
    }
    let target_idx = net
        .index_of(target)
        .ok_or_else(|| BayesError::UnknownVariable(target.to_string()))?;
    let mut observed = Vec::with_capacity(evidence.len());
    let mut target_observed = None;
    for (name, obs) in evidence.iter() {
        let v = net
            .index_of(name)
            .ok_or_else(|| BayesError::UnknownVariable(name.to_string()))?;
        let s = net
            .variable(v)
            .state_index(&obs.state)
            .ok_or_else(|| BayesError::UnknownState {
                variable: name.to_string(),
                state: obs.state.clone(),
            })?;
        if v == target_idx {
            target_observed = Some(s);
        } else {
            observed.push((v, s));
        }
    }
    observed.sort_unstable();
    Ok(Query {
        target: target_idx,
        observed,
        target_observed,
    })
}

fn normalize(net: &BayesNet, target: usize, unnormalized: Vec<f64>) -> Result<Posterior, BayesError> {
    let z: f64 = unnormalized.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(BayesError::ImpossibleEvidence);
    }
    let var = net.variable(target);
    Posterior::new(
        var.name(),
        var.states().to_vec(),
        unnormalized.into_iter().map(|w| w / z).collect(),
    )
}

/// An observed target collapses to a point mass, provided the observation is
/// possible under the remaining evidence.
fn degenerate(net: &BayesNet, q: &Query, marginal: &[f64], state: usize) -> Result<Posterior, BayesError> {
    if !(marginal[state] > 0.0) {
        return Err(BayesError::ImpossibleEvidence);
    }
    let var = net.variable(q.target);
    let mut weights = vec![0.0; var.states().len()];
    weights[state] = 1.0;
    Posterior::new(var.name(), var.states().to_vec(), weights)
}

fn cpt_factor(net: &BayesNet, var: usize) -> Factor {
    let parents = net.parents(var);
    let mut vars: Vec<usize> = parents.to_vec();
    let pos = vars.binary_search(&var).unwrap_or_else(|p| p);
    vars.insert(pos, var);
    let cards: Vec<usize> = vars.iter().map(|&v| net.cardinality(v)).collect();
    let size: usize = cards.iter().product();
    let mut values = Vec::with_capacity(size);
    let mut assignment = vec![0usize; vars.len()];
    for _ in 0..size {
        let row = net.row_index(
            var,
            vars.iter()
                .zip(&assignment)
                .filter(|(&v, _)| v != var)
                .map(|(_, &s)| s),
        );
        values.push(net.cpt(var)[row][assignment[pos]]);
        for k in (0..vars.len()).rev() {
            assignment[k] += 1;
            if assignment[k] < cards[k] {
                break;
            }
            assignment[k] = 0;
        }
    }
    Factor { vars, cards, values }
}

/// Variables that can influence the query: ancestors of the target and of
/// every observed variable. Everything else is barren and sums to one.
fn relevant(net: &BayesNet, q: &Query) -> Vec<bool> {
    let mut keep = vec![false; net.len()];
    let mut stack: Vec<usize> = q.observed.iter().map(|&(v, _)| v).collect();
    stack.push(q.target);
    while let Some(v) = stack.pop() {
        if keep[v] {
            continue;
        }
        keep[v] = true;
        stack.extend_from_slice(net.parents(v));
    }
    keep
}

/// Exact posterior of `target` given `evidence` by variable elimination with
/// a min-degree ordering.
pub fn posterior(net: &BayesNet, target: &str, evidence: &Evidence) -> Result<Posterior, BayesError> {
    let q = resolve(net, target, evidence)?;
    let keep = relevant(net, &q);

    let mut factors: Vec<Factor> = (0..net.len())
        .filter(|&v| keep[v])
        .map(|v| {
            q.observed
                .iter()
                .fold(cpt_factor(net, v), |f, &(ov, os)| f.reduce(ov, os))
        })
        .collect();

    let mut pending: Vec<usize> = (0..net.len())
        .filter(|&v| keep[v] && v != q.target && q.observed.binary_search_by_key(&v, |o| o.0).is_err())
        .collect();

    while !pending.is_empty() {
        let (slot, var) = pending
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| (neighbour_count(&factors, v), v))
            .map(|(slot, &v)| (slot, v))
            .expect("pending is non-empty");
        pending.remove(slot);

        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.contains(var));
        factors = rest;
        let merged = touching
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        factors.push(merged.sum_out(var));
    }

    let joint = factors
        .iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
    debug_assert_eq!(joint.vars, vec![q.target]);

    match q.target_observed {
        Some(state) => degenerate(net, &q, &joint.values, state),
        None => normalize(net, q.target, joint.values),
    }
}

fn neighbour_count(factors: &[Factor], var: usize) -> usize {
    let mut neighbours: Vec<usize> = factors
        .iter()
        .filter(|f| f.contains(var))
        .flat_map(|f| f.vars.iter().copied())
        .filter(|&v| v != var)
        .collect();
    neighbours.sort_unstable();
    neighbours.dedup();
    neighbours.len()
}

/// Posterior by explicit summation over the full joint table. Reference
/// implementation for [`posterior`]; refuses joints above
/// [`BRUTE_FORCE_LIMIT`] entries.
pub fn brute_force_posterior(
    net: &BayesNet,
    target: &str,
    evidence: &Evidence,
) -> Result<Posterior, BayesError> {
    let q = resolve(net, target, evidence)?;
    let size = net.joint_size();
    if size > BRUTE_FORCE_LIMIT {
        return Err(BayesError::TooLarge {
            entries: size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let n = net.len();
    let mut fixed: Vec<Option<usize>> = vec![None; n];
    for &(v, s) in &q.observed {
        fixed[v] = Some(s);
    }

    let mut marginal = vec![0.0; net.cardinality(q.target)];
    let mut assignment = vec![0usize; n];
    for _ in 0..size {
        let consistent = fixed
            .iter()
            .zip(&assignment)
            .all(|(f, &s)| f.is_none_or(|fs| fs == s));
        if consistent {
            let mut p = 1.0;
            for v in 0..n {
                let row = net.row_index(v, net.parents(v).iter().map(|&pa| assignment[pa]));
                p *= net.cpt(v)[row][assignment[v]];
            }
            marginal[assignment[q.target]] += p;
        }
        for k in (0..n).rev() {
            assignment[k] += 1;
            if assignment[k] < net.cardinality(k) {
                break;
            }
            assignment[k] = 0;
        }
    }

    match q.target_observed {
        Some(state) => degenerate(net, &q, &marginal, state),
        None => normalize(net, q.target, marginal),
    }
}
