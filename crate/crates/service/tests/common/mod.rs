#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timecrit::bayes::{BayesNet, Evidence, Posterior};
use timecrit::tdutility::{TimeDistribution, UtilityCurve, UtilityModel};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap()
}

pub fn fixture_json(name: &str) -> serde_json::Value {
    serde_json::from_slice(&fixture(name)).unwrap()
}

/// Closed-form desk fixture, written out independently of the library.
pub mod desk_oracle {
    /// `p(hemorrhage | findings)` by Bayes' rule on the fixture tables.
    pub fn p_hem(hypotension: Option<bool>, distension: Option<bool>) -> f64 {
        let like = |finding: Option<bool>, p_pos: f64| match finding {
            None => 1.0,
            Some(true) => p_pos,
            Some(false) => 1.0 - p_pos,
        };
        let hem = 0.3 * like(hypotension, 0.9) * like(distension, 0.7);
        let stable = 0.7 * like(hypotension, 0.1) * like(distension, 0.2);
        hem / (hem + stable)
    }

    pub fn eu(p: f64, action: &str, t: f64) -> f64 {
        match action {
            "transport" => p * 100.0 * (-0.02 * t).exp() + (1.0 - p) * 90.0,
            "observe" => p * 100.0 * (-0.05 * t).exp() + (1.0 - p) * 100.0,
            _ => unreachable!(),
        }
    }

    pub fn best(p: f64, t: f64) -> f64 {
        eu(p, "transport", t).max(eu(p, "observe", t))
    }

    pub fn ecda(p: f64, t0: f64, t: f64) -> f64 {
        best(p, t0) - best(p, t)
    }
}

/// A random DAG over `n` binary variables with up to three parents drawn
/// from earlier variables and strictly positive CPT entries.
pub fn random_net(seed: u64, n: usize) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = BayesNet::builder();
    for i in 0..n {
        builder = builder.variable(format!("V{i}"), ["s0", "s1"]);
    }
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for child in 1..n {
        for parent in 0..child {
            if parents[child].len() < 3 && rng.random_bool(0.35) {
                parents[child].push(parent);
                builder = builder.edge(format!("V{parent}"), format!("V{child}"));
            }
        }
    }
    for (v, ps) in parents.iter().enumerate() {
        let table = (0..1usize << ps.len())
            .map(|_| {
                let a = rng.random_range(0.05..1.0);
                let b = rng.random_range(0.05..1.0);
                vec![a / (a + b), b / (a + b)]
            })
            .collect();
        builder = builder.cpt(format!("V{v}"), table);
    }
    builder.hypothesis("V0").build().unwrap()
}

/// Random evidence over a subset of the variables other than `skip`.
pub fn random_evidence(net: &BayesNet, seed: u64, skip: usize) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut ev = Evidence::new();
    for (i, var) in net.variables().iter().enumerate() {
        if i != skip && rng.random_bool(0.3) {
            let s = rng.random_range(0..var.states().len());
            ev.observe(var.name(), var.states()[s].clone(), 0.0);
        }
    }
    ev
}

/// A random non-increasing curve of any urgency kind.
pub fn random_urgency_curve(rng: &mut impl Rng) -> UtilityCurve {
    let top = rng.random_range(20.0..100.0);
    let bottom = top - rng.random_range(0.0..60.0);
    match rng.random_range(0..6) {
        0 => UtilityCurve::Constant { value: top },
        1 => UtilityCurve::LinearUrgency {
            start: top,
            slope: -rng.random_range(0.0..3.0),
            floor: bottom,
        },
        2 => UtilityCurve::ExponentialUrgency {
            amplitude: top - bottom,
            rate: rng.random_range(0.0..0.1),
            offset: bottom,
        },
        3 => UtilityCurve::HardDeadline {
            pre: top,
            post: bottom,
            deadline: rng.random_range(0.0..90.0),
        },
        4 => {
            let a = rng.random_range(0.0..45.0);
            let b = a + rng.random_range(1.0..45.0);
            let w = rng.random_range(0.1..0.9);
            UtilityCurve::UncertainDeadline {
                pre: top,
                post: bottom,
                deadline: TimeDistribution::new(vec![(a, w), (b, 1.0 - w)]).unwrap(),
            }
        }
        _ => {
            let mut t = 0.0;
            let mut v = top;
            let knots = (0..rng.random_range(1..5))
                .map(|_| {
                    let knot = (t, v);
                    t += rng.random_range(1.0..40.0);
                    v -= rng.random_range(0.0..20.0);
                    knot
                })
                .collect();
            UtilityCurve::PiecewiseLinear { knots }
        }
    }
}

/// A random urgency-class model with 2-4 actions and 2-3 states over `H`,
/// plus a matching random posterior.
pub fn random_urgency_problem(seed: u64) -> (UtilityModel, Posterior) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_actions = rng.random_range(2..=4);
    let n_states = rng.random_range(2..=3);
    let actions: Vec<String> = (0..n_actions).map(|a| format!("a{a}")).collect();
    let states: Vec<String> = (0..n_states).map(|s| format!("h{s}")).collect();
    let curves = (0..n_actions)
        .map(|_| (0..n_states).map(|_| random_urgency_curve(&mut rng)).collect())
        .collect();
    let model = UtilityModel::new("H", actions, states.clone(), curves).unwrap();
    let raw: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.01..1.0)).collect();
    let z: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|x| x / z).collect();
    let drift: f64 = 1.0 - weights.iter().sum::<f64>();
    weights[0] += drift;
    (model, Posterior::new("H", states, weights).unwrap())
}
