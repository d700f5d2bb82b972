#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timecrit::bayes::{BayesNet, Evidence, Posterior};
use timecrit::tdutility::{TimeDistribution, UtilityCurve, UtilityModel};

pub const HEM: &str = "hemorrhage";
pub const STABLE: &str = "stable";

pub fn desk_net() -> BayesNet {
    BayesNet::builder()
        .variable("H", [HEM, STABLE])
        .variable("hypotension", ["+", "-"])
        .variable("distension", ["+", "-"])
        .edge("H", "hypotension")
        .edge("H", "distension")
        .cpt("H", vec![vec![0.3, 0.7]])
        .cpt("hypotension", vec![vec![0.9, 0.1], vec![0.1, 0.9]])
        .cpt("distension", vec![vec![0.7, 0.3], vec![0.2, 0.8]])
        .hypothesis("H")
        .build()
        .unwrap()
}

pub fn desk_model() -> UtilityModel {
    let exp = |rate| UtilityCurve::ExponentialUrgency {
        amplitude: 100.0,
        rate,
        offset: 0.0,
    };
    UtilityModel::new(
        "H",
        vec!["transport".into(), "observe".into()],
        vec![HEM.into(), STABLE.into()],
        vec![
            vec![exp(0.02), UtilityCurve::Constant { value: 90.0 }],
            vec![exp(0.05), UtilityCurve::Constant { value: 100.0 }],
        ],
    )
    .unwrap()
}

pub fn desk_posterior(p_hem: f64) -> Posterior {
    Posterior::new("H", vec![HEM.into(), STABLE.into()], vec![p_hem, 1.0 - p_hem]).unwrap()
}

/// Closed-form desk fixture, written out independently of the library.
pub mod desk_oracle {
    pub fn eu(p: f64, action: &str, t_hem: f64, t_stable: f64) -> f64 {
        let _ = t_stable; // the stable curves are constant
        match action {
            "transport" => p * 100.0 * (-0.02 * t_hem).exp() + (1.0 - p) * 90.0,
            "observe" => p * 100.0 * (-0.05 * t_hem).exp() + (1.0 - p) * 100.0,
            _ => unreachable!(),
        }
    }

    pub fn best(p: f64, t: f64) -> f64 {
        eu(p, "transport", t, t).max(eu(p, "observe", t, t))
    }

    pub fn ecda(p: f64, t0: f64, t: f64) -> f64 {
        best(p, t0) - best(p, t)
    }
}

pub fn dist(atoms: &[(f64, f64)]) -> TimeDistribution {
    TimeDistribution::new(atoms.to_vec()).unwrap()
}

/// A random DAG over `n` variables with 2-3 states each, up to three parents
/// drawn from earlier variables, and strictly positive CPT entries.
pub fn random_net(seed: u64, n: usize, binary: bool) -> BayesNet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cards: Vec<usize> = (0..n)
        .map(|_| if binary { 2 } else { rng.random_range(2..=3) })
        .collect();
    let mut builder = BayesNet::builder();
    for (i, &card) in cards.iter().enumerate() {
        builder = builder.variable(format!("V{i}"), (0..card).map(|s| format!("s{s}")));
    }
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for child in 1..n {
        for parent in 0..child {
            if parents[child].len() < 3 && rng.random_bool(0.35) {
                parents[child].push(parent);
            }
        }
    }
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            builder = builder.edge(format!("V{p}"), format!("V{child}"));
        }
    }
    for (v, ps) in parents.iter().enumerate() {
        let rows: usize = ps.iter().map(|&p| cards[p]).product();
        let table = (0..rows)
            .map(|_| {
                let raw: Vec<f64> = (0..cards[v]).map(|_| rng.random_range(0.05..1.0)).collect();
                let z: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / z).collect()
            })
            .collect();
        builder = builder.cpt(format!("V{v}"), table);
    }
    builder.hypothesis("V0").build().unwrap()
}

/// Random evidence over a subset of the variables other than `skip`.
pub fn random_evidence(net: &BayesNet, seed: u64, skip: usize) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
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

/// A random urgency-class model with 2-4 actions and 2-3 states, plus a
/// matching random posterior.
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
    // absorb rounding so the weights sum to 1 within tolerance
    let drift: f64 = 1.0 - weights.iter().sum::<f64>();
    weights[0] += drift;
    let posterior = Posterior::new("H", states, weights).unwrap();
    (model, posterior)
}
