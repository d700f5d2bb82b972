mod common;

use std::sync::Arc;
use std::thread;

use common::*;
use serde_json::json;
use timecrit::bayes::{posterior, value_of_information, Evidence};
use timecrit::ecda::*;
use timecrit::tdutility::TimeDistribution;
use timecrit_service::{AssessmentRequest, ErrorCode, Finding, NewSession, Store};

fn finding(variable: &str, state: &str, timestamp: f64) -> Finding {
    Finding {
        variable: variable.into(),
        state: state.into(),
        timestamp,
    }
}

fn desk_store() -> (Store, String) {
    let store = Store::new();
    let id = store.load_model(&fixture("desk_model.json")).unwrap();
    (store, id)
}

#[test]
fn loaded_models_are_retrievable_and_idempotent() {
    let (store, id) = desk_store();
    assert_eq!(store.model(&id).unwrap().hypotheses(), ["H"]);
    assert_eq!(store.load_model(&fixture("desk_model.json")).unwrap(), id);
    assert_eq!(store.model("m-nope").unwrap_err().code, ErrorCode::NotFound);
}

#[test]
fn invalid_model_files_are_rejected_with_locations() {
    let store = Store::new();
    let mut doc = fixture_json("desk_model.json");
    doc["cpts"]["distension"]["H=stable"] = json!([0.2, 0.7]);
    let e = store.load_model(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!((e.code, e.path.as_str()), (ErrorCode::ValidationError, "cpts.distension[H=stable]"));

    let mut doc = fixture_json("desk_model.json");
    doc["utility"]["transport"]["stable"]["kind"] = json!("quadratic_urgency");
    let e = store.load_model(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!(e.path, "utility.transport.stable");
    assert!(e.message.contains("quadratic_urgency"));

    let e = store.load_model(b"{\"variables\": [").unwrap_err();
    assert_eq!(e.code, ErrorCode::ParseError);
    assert!(e.message.contains("line 1"), "{}", e.message);
}

#[test]
fn sessions_start_empty_and_need_a_known_model() {
    let (store, id) = desk_store();
    let s = store.create_session(NewSession::for_model(&id)).unwrap();
    let session = store.session(&s).unwrap();
    assert!(session.log.is_empty());
    assert_eq!(session.onset, TimeDistribution::point_mass(0.0).unwrap());
    assert_eq!(
        store.create_session(NewSession::for_model("m-unknown")).unwrap_err().code,
        ErrorCode::NotFound
    );
    let bad_context = NewSession {
        context: Some("splinted".into()),
        ..NewSession::for_model(&id)
    };
    assert_eq!(store.create_session(bad_context).unwrap_err().code, ErrorCode::ValidationError);
}

#[test]
fn posting_a_finding_updates_the_posterior() {
    let (store, id) = desk_store();
    let s = store.create_session(NewSession::for_model(&id)).unwrap();
    let a = store.post_finding(&s, finding("hypotension", "+", 0.0)).unwrap();
    let p = a.differentials[0].states[0].probability;
    assert!((p - desk_oracle::p_hem(Some(true), None)).abs() < 1e-12);
    assert!((p - 0.794118).abs() < 1e-6);
    assert_eq!(a.differentials[0].ranked[0].state, "hemorrhage");
    assert_eq!(a.evidence, vec![finding("hypotension", "+", 0.0)]);
}

#[test]
fn rejected_findings_leave_the_log_unchanged() {
    let (store, id) = desk_store();
    let s = store.create_session(NewSession::for_model(&id)).unwrap();
    store.post_finding(&s, finding("hypotension", "+", 5.0)).unwrap();
    let before = store.session(&s).unwrap();
    let e = store.post_finding(&s, finding("hypotension", "maybe", 6.0)).unwrap_err();
    assert_eq!((e.code, e.path.as_str()), (ErrorCode::ValidationError, "state"));
    let e = store.post_finding(&s, finding("pulse", "+", 6.0)).unwrap_err();
    assert_eq!(e.path, "variable");
    let e = store.post_finding(&s, finding("distension", "+", 4.0)).unwrap_err();
    assert_eq!(e.code, ErrorCode::TimestampRegression);
    assert_eq!(store.session(&s).unwrap(), before);
}

#[test]
fn re_observation_supersedes_but_both_are_logged() {
    let (store, id) = desk_store();
    let s = store.create_session(NewSession::for_model(&id)).unwrap();
    store.post_finding(&s, finding("hypotension", "+", 1.0)).unwrap();
    let a = store.post_finding(&s, finding("hypotension", "-", 3.0)).unwrap();
    assert_eq!(a.evidence, vec![finding("hypotension", "-", 3.0)]);
    let p = a.differentials[0].states[0].probability;
    assert!((p - desk_oracle::p_hem(Some(false), None)).abs() < 1e-12);
    assert_eq!(store.session(&s).unwrap().log.len(), 2);
}

#[test]
fn assessment_examples() {
    let (store, id) = desk_store();
    let s = store.create_session(NewSession::for_model(&id)).unwrap();
    store.post_finding(&s, finding("hypotension", "+", 0.0)).unwrap();
    let a = store
        .get_assessment(&s, &AssessmentRequest::at(0.0).with_grid(vec![0.0, 30.0]))
        .unwrap();
    let p = desk_oracle::p_hem(Some(true), None);
    assert_eq!(a.best_action.action, "observe");
    assert_eq!(a.ecda[0].value, 0.0);
    assert!((a.ecda[1].value - desk_oracle::ecda(p, 0.0, 30.0)).abs() < 1e-12);
    assert!((a.ecda[1].value - 37.888).abs() < 1e-2);
    // observe's hemorrhage curve is already decaying at t = 0
    let crit = (desk_oracle::best(p, 0.0) - desk_oracle::best(p, 0.1)) / 0.1;
    assert!((a.criticality - crit).abs() < 1e-9);
    assert!(a.criticality > 0.0);
    assert_eq!(a.voi.entries.len(), 1);
    assert_eq!(a.voi.entries[0].variable, "distension");

    let empty = store.create_session(NewSession::for_model(&id)).unwrap();
    let a = store
        .get_assessment(&empty, &AssessmentRequest::at(30.0).with_grid(vec![0.0]))
        .unwrap();
    assert_eq!(a.best_action.action, "transport");
    assert!((a.best_action.expected_utility - desk_oracle::best(0.3, 30.0)).abs() < 1e-12);
    assert!((a.best_action.expected_utility - 79.46).abs() < 1e-2);
    assert_eq!(a.ecda, vec![timecrit_service::assessment::DelaySample { delay: 0.0, value: 0.0 }]);

    assert_eq!(
        store.get_assessment("s-missing", &AssessmentRequest::at(0.0)).unwrap_err().code,
        ErrorCode::NotFound
    );
}

#[test]
fn assessment_arguments_are_checked() {
    let (store, id) = desk_store();
    let s = store
        .create_session(NewSession {
            origin: Some(10.0),
            ..NewSession::for_model(&id)
        })
        .unwrap();
    let e = store.get_assessment(&s, &AssessmentRequest::at(5.0)).unwrap_err();
    assert_eq!((e.code, e.path.as_str()), (ErrorCode::InvalidRequest, "now"));
    let e = store
        .get_assessment(&s, &AssessmentRequest::at(10.0).with_grid(vec![5.0, 0.0]))
        .unwrap_err();
    assert_eq!(e.path, "grid[1]");
    let e = store
        .get_assessment(&s, &AssessmentRequest::at(10.0).with_grid(vec![-1.0]))
        .unwrap_err();
    assert_eq!(e.path, "grid[0]");
    let a = store.get_assessment(&s, &AssessmentRequest::at(40.0)).unwrap();
    assert_eq!(a.elapsed, 30.0);
    assert_eq!(a.ecda.len(), 7);
}

/// Recomputes every assessment figure straight from the core modules.
#[test]
fn every_assessment_figure_matches_direct_recomputation() {
    let (store, id) = desk_store();
    let bundle = store.model(&id).unwrap();
    let onset = TimeDistribution::new(vec![(0.0, 0.5), (30.0, 0.5)]).unwrap();
    let s = store
        .create_session(NewSession {
            onset: Some(onset.clone()),
            context: Some("bleeding_controlled".into()),
            origin: Some(2.0),
            ..NewSession::for_model(&id)
        })
        .unwrap();
    store.post_finding(&s, finding("distension", "+", 4.0)).unwrap();
    let treatment: TreatmentOption = serde_json::from_slice(&fixture("fluids.json")).unwrap();
    let travel = TimeDistribution::new(vec![(8.0, 0.25), (15.0, 0.75)]).unwrap();
    let request = AssessmentRequest {
        now: 12.0,
        grid: vec![0.0, 5.0, 30.0],
        treatment: Some(treatment.clone()),
        routes: vec![timecrit_service::assessment::Route {
            name: "highway".into(),
            travel: travel.clone(),
        }],
    };
    let a = store.get_assessment(&s, &request).unwrap();

    let ev = Evidence::new().with("distension", "+");
    let post = posterior(bundle.net(), "H", &ev).unwrap();
    let t = 10.0;
    let dp = DecisionProblem::new(&post, bundle.utility())
        .unwrap()
        .with_context(Some("bleeding_controlled"))
        .unwrap()
        .with_reference_time(t)
        .unwrap();
    let close = |x: f64, y: f64| assert!((x - y).abs() <= 1e-12, "{x} vs {y}");

    assert_eq!(a.elapsed, t);
    close(a.differentials[0].states[0].probability, post.weights()[0]);
    assert_eq!(a.best_action, best_action(&dp, t).unwrap());
    for (u, direct) in a.expected_utilities.iter().zip(dp.expected_utilities(t).unwrap()) {
        close(u.expected_utility, direct);
    }
    for sample in &a.ecda {
        close(sample.value, ecda(&dp, t + sample.delay).unwrap());
    }
    close(a.criticality, criticality(&dp, t, 0.1).unwrap());
    let voi = value_of_information(
        bundle.net(),
        "H",
        &ev,
        ["hypotension"],
        bundle.utility(),
        t,
        Some("bleeding_controlled"),
    )
    .unwrap();
    assert_eq!(a.voi, voi);
    let shifted = onset.shifted(t).unwrap();
    close(a.comprehensive_ecda, comprehensive_ecda(&dp, &shifted).unwrap());
    for sample in &a.ecda_duration_uncertain {
        close(sample.value, ecda_with_duration_uncertainty(&dp, &shifted, sample.delay).unwrap());
    }
    let at_onset = dp.with_reference_time(0.0).unwrap();
    assert_eq!(a.load_and_go.as_ref().unwrap(), &evaluate_load_and_go(&at_onset, &treatment, t).unwrap());
    close(a.transport[0].ecda, ecda_transport(&dp, &travel.shifted(t).unwrap()).unwrap());

    // reads are side-effect free and repeatable
    assert_eq!(store.get_assessment(&s, &request).unwrap(), a);
}

#[test]
fn supplied_onset_feeds_comprehensive_ecda() {
    let (store, id) = desk_store();
    let onset = TimeDistribution::new(vec![(0.0, 0.5), (30.0, 0.5)]).unwrap();
    let s = store
        .create_session(NewSession {
            onset: Some(onset.clone()),
            ..NewSession::for_model(&id)
        })
        .unwrap();
    store.post_finding(&s, finding("hypotension", "+", 0.0)).unwrap();
    let a = store.get_assessment(&s, &AssessmentRequest::at(0.0)).unwrap();
    assert_eq!(a.onset, onset);
    let p = desk_oracle::p_hem(Some(true), None);
    let expected = 0.5 * desk_oracle::ecda(p, 0.0, 0.0) + 0.5 * desk_oracle::ecda(p, 0.0, 30.0);
    assert!((a.comprehensive_ecda - expected).abs() < 1e-12);
}

#[test]
fn load_and_go_fixture_recommends_treating_locally() {
    let (store, id) = desk_store();
    let s = store.create_session(NewSession::for_model(&id)).unwrap();
    store.post_finding(&s, finding("hypotension", "+", 0.0)).unwrap();
    let fluids: TreatmentOption = serde_json::from_slice(&fixture("fluids.json")).unwrap();
    let r = store.load_and_go(&s, &fluids, Some(30.0)).unwrap();
    let p = desk_oracle::p_hem(Some(true), None);
    let treated = (p * 100.0 * (-0.02f64 * 15.0).exp() + (1.0 - p) * 90.0)
        .max(p * 100.0 * (-0.05f64 * 15.0).exp() + (1.0 - p) * 100.0);
    assert!((r.ecda_with_treatment - (100.0 - treated)).abs() < 1e-12);
    assert!((r.ecda_load_and_go - desk_oracle::ecda(p, 0.0, 30.0)).abs() < 1e-12);
    assert_eq!(r.recommendation, Recommendation::TreatLocally);
    // defaults to the latest logged time
    let r0 = store.load_and_go(&s, &fluids, None).unwrap();
    assert_eq!(r0.ecda_load_and_go, 0.0);
}

#[test]
fn sessions_round_trip_through_bytes() {
    let (store, id) = desk_store();
    let s = store
        .create_session(NewSession {
            onset: Some(TimeDistribution::new(vec![(0.0, 0.25), (12.5, 0.75)]).unwrap()),
            context: Some("bleeding_controlled".into()),
            origin: Some(1.0 / 3.0),
            ..NewSession::for_model(&id)
        })
        .unwrap();
    store.post_finding(&s, finding("hypotension", "+", 0.7)).unwrap();
    store.post_finding(&s, finding("hypotension", "-", 2.0 / 3.0 + 1.0)).unwrap();
    let request = AssessmentRequest::at(17.1);
    let before = store.get_assessment(&s, &request).unwrap();
    let bytes = store.save_session(&s).unwrap();

    // same store: the id is taken, so a fresh one is assigned
    let copy = store.load_session(&bytes).unwrap();
    assert_ne!(copy, s);
    let restored = store.session(&copy).unwrap();
    let original = store.session(&s).unwrap();
    assert_eq!(restored.log, original.log);
    assert_eq!((restored.origin, &restored.onset, &restored.context), (original.origin, &original.onset, &original.context));
    let after = store.get_assessment(&copy, &request).unwrap();
    assert_eq!(after.session, copy);
    assert_eq!(serde_json::to_value(&after).unwrap()["differentials"], serde_json::to_value(&before).unwrap()["differentials"]);
    assert_eq!(timecrit_service::Assessment { session: s.clone(), ..after }, before);

    // fresh store with the same model: the saved id is kept
    let other = Store::new();
    other.load_model(&fixture("desk_model.json")).unwrap();
    assert_eq!(other.load_session(&bytes).unwrap(), s);
    assert_eq!(other.get_assessment(&s, &request).unwrap(), before);

    let e = store.load_session(&bytes[..bytes.len() - 10]).unwrap_err();
    assert_eq!(e.code, ErrorCode::ParseError);
    assert_eq!(Store::new().load_session(&bytes).unwrap_err().code, ErrorCode::NotFound);
}

#[test]
fn scenario_evaluation() {
    let (store, _) = desk_store();
    let ranked = store.evaluate_scenario(&fixture("two_patient.json")).unwrap();
    assert_eq!(ranked.len(), 2);
    let pa = desk_oracle::p_hem(Some(true), Some(true));
    let a_first = desk_oracle::ecda(pa, 0.0, 10.0) + desk_oracle::ecda(0.3, 0.0, 30.0);
    let b_first = desk_oracle::ecda(0.3, 0.0, 10.0) + desk_oracle::ecda(pa, 0.0, 30.0);
    assert_eq!(ranked[0].plan.routes[0].trips[0].patient, "A");
    assert!((ranked[0].total - a_first).abs() < 1e-12);
    assert!((ranked[1].total - b_first).abs() < 1e-12);
    assert_eq!(store.evaluate_scenario(&fixture("two_patient.json")).unwrap(), ranked);

    let mut doc = fixture_json("two_patient.json");
    doc["facilities"][0]["capacity"] = json!(1);
    let e = store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!(e.code, ErrorCode::InfeasibleScenario);

    let mut doc = fixture_json("two_patient.json");
    doc["patients"].as_array_mut().unwrap().pop();
    assert_eq!(store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap().len(), 1);

    let mut doc = fixture_json("two_patient.json");
    let template = doc["patients"][1].clone();
    for i in 0..6 {
        let mut p = template.clone();
        p["id"] = json!(format!("extra-{i}"));
        doc["patients"].as_array_mut().unwrap().push(p);
    }
    let e = store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!(e.code, ErrorCode::TooLarge);
    assert!(e.message.contains("decompose"));
}

#[test]
fn scenario_errors_point_into_the_file() {
    let (store, id) = desk_store();
    let mut doc = fixture_json("two_patient.json");
    doc["patients"][1]["findings"] = json!({"hypotension": "maybe"});
    let e = store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!(e.path, "patients[1].findings");

    let mut doc = fixture_json("two_patient.json");
    doc["models"]["desk"]["cpts"]["H"] = json!([0.3, 0.6]);
    let e = store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!(e.path, "models.desk.cpts.H");

    let mut doc = fixture_json("two_patient.json");
    doc["transport"][0]["support"] = json!([[10, 0.5]]);
    let e = store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!(e.path, "transport[0].support");

    // a model loaded into the store can be referenced by id
    let mut doc = fixture_json("two_patient.json");
    doc.as_object_mut().unwrap().remove("models");
    doc["patients"][0]["model"] = json!(id);
    doc["patients"][1]["model"] = json!(id);
    assert_eq!(store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap().len(), 2);
    doc["patients"][1]["model"] = json!("m-elsewhere");
    let e = store.evaluate_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    assert_eq!((e.code, e.path.as_str()), (ErrorCode::NotFound, "patients[1].model"));
}

#[test]
fn concurrent_posts_are_serialized_per_session() {
    let (store, id) = desk_store();
    let store = Arc::new(store);
    let shared = store.create_session(NewSession::for_model(&id)).unwrap();
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let store = store.clone();
            let shared = shared.clone();
            let own = store.create_session(NewSession::for_model(&id)).unwrap();
            thread::spawn(move || {
                for k in 0..20 {
                    let state = if (i + k) % 2 == 0 { "+" } else { "-" };
                    store.post_finding(&own, finding("hypotension", state, k as f64)).unwrap();
                    // concurrent writers race on the timestamp; losers see a
                    // regression error and leave the log untouched
                    let _ = store.post_finding(&shared, finding("distension", state, (i * 20 + k) as f64));
                    store.get_assessment(&shared, &AssessmentRequest::at(1000.0)).unwrap();
                }
                own
            })
        })
        .collect();
    for h in handles {
        let own = h.join().unwrap();
        assert_eq!(store.session(&own).unwrap().log.len(), 20);
    }
    let log = store.session(&shared).unwrap().log;
    assert!(!log.is_empty());
    assert!(log.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
}
