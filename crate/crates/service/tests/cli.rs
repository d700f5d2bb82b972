mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Command, Stdio};

use common::*;
use serde_json::{json, Value};

fn timecrit(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_timecrit")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let value = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("{e}: {stdout}"));
    (out.status.code().unwrap(), value)
}

fn desk() -> String {
    fixture_path("desk_model.json").display().to_string()
}

#[test]
fn validate_reports_success_and_violations() {
    let (code, v) = timecrit(&["validate", &desk()]);
    assert_eq!(code, 0);
    assert_eq!(v["valid"], true);
    assert_eq!(v["hypotheses"], json!(["H"]));

    let dir = std::env::temp_dir().join(format!("timecrit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad_model.json");
    let mut doc = fixture_json("desk_model.json");
    doc["cpts"]["hypotension"]["H=stable"] = json!([0.1, 0.8]);
    std::fs::write(&bad, serde_json::to_vec(&doc).unwrap()).unwrap();
    let (code, v) = timecrit(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["code"], "validation_error");
    assert_eq!(v["path"], "cpts.hypotension[H=stable]");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn infer_prints_posteriors() {
    let (code, v) = timecrit(&["infer", &desk(), "--evidence", "hypotension=+", "distension=+"]);
    assert_eq!(code, 0);
    let p = v["posteriors"][0]["states"][0]["probability"].as_f64().unwrap();
    assert!((p - desk_oracle::p_hem(Some(true), Some(true))).abs() < 1e-12);

    let (code, v) = timecrit(&["infer", &desk(), "--evidence", "hypotension=+", "--target", "distension"]);
    assert_eq!(code, 0);
    assert_eq!(v["posteriors"][0]["variable"], "distension");

    let (code, v) = timecrit(&["infer", &desk(), "--evidence", "pulse=weak"]);
    assert_eq!(code, 1);
    assert_eq!(v["code"], "validation_error");
}

#[test]
fn ecda_prints_the_golden_value() {
    let (code, v) = timecrit(&["ecda", &desk(), "--evidence", "hypotension=+", "--t", "30"]);
    assert_eq!(code, 0);
    let p = desk_oracle::p_hem(Some(true), None);
    let ecda = v["ecda"].as_f64().unwrap();
    assert!((ecda - desk_oracle::ecda(p, 0.0, 30.0)).abs() < 1e-12);
    assert!((ecda - 37.888).abs() < 1e-2);
    assert_eq!(v["best_action_at_t_o"]["action"], "observe");
    assert_eq!(v["best_action_at_t"]["action"], "transport");
    assert!(v.get("comprehensive_ecda").is_none());

    let (code, v) = timecrit(&[
        "ecda", &desk(), "--evidence", "hypotension=+", "--t", "30", "--onset", "0:0.5,30:0.5",
    ]);
    assert_eq!(code, 0);
    let expected = 0.5 * desk_oracle::ecda(p, 0.0, 30.0) + 0.5 * desk_oracle::ecda(p, 30.0, 60.0);
    assert!((v["ecda_duration_uncertain"].as_f64().unwrap() - expected).abs() < 1e-12);

    let (code, v) = timecrit(&["ecda", &desk(), "--t", "5", "--t-o", "10"]);
    assert_eq!(code, 1);
    assert_eq!(v["code"], "invalid_request");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["ecda", "x.json"],
        vec!["infer", "x.json", "--evidence", "hypotension"],
        vec!["ecda", "x.json", "--t", "30", "--onset", "0:0.5,30:0.4"],
        vec!["frobnicate"],
    ] {
        let (code, v) = timecrit(&args);
        assert_eq!(code, 2, "{args:?}");
        assert_eq!(v["code"], "usage_error");
    }
    let (code, _) = timecrit(&["validate", "/nonexistent/model.json"]);
    assert_eq!(code, 2);
}

#[test]
fn plan_and_voi() {
    let scenario = fixture_path("two_patient.json").display().to_string();
    let (code, v) = timecrit(&["plan", &scenario]);
    assert_eq!(code, 0);
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!((v[0]["total"].as_f64().unwrap() - 38.11).abs() < 1e-2);

    let (code, v) = timecrit(&["voi", &desk(), "--t", "30"]);
    assert_eq!(code, 0);
    assert_eq!(v["entries"][0]["variable"], "hypotension");
    assert!((v["entries"][0]["evi"].as_f64().unwrap() - 5.33).abs() < 1e-2);
}

#[test]
fn plan_resolves_model_paths_relative_to_the_scenario() {
    let dir = std::env::temp_dir().join(format!("timecrit-plan-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("desk.json"), fixture("desk_model.json")).unwrap();
    let mut doc = fixture_json("two_patient.json");
    doc.as_object_mut().unwrap().remove("models");
    doc["patients"][0]["model"] = json!("desk.json");
    doc["patients"][1]["model"] = json!("desk.json");
    std::fs::write(dir.join("scenario.json"), serde_json::to_vec(&doc).unwrap()).unwrap();
    let (code, v) = timecrit(&["plan", dir.join("scenario.json").to_str().unwrap()]);
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(code, 0, "{v}");
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn serve_answers_http() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_timecrit"))
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr: Value = serde_json::from_str(&line).unwrap();
    let mut stream = TcpStream::connect(addr["listening"].as_str().unwrap()).unwrap();
    write!(stream, "GET /sessions/s-none/export HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 404"), "{response}");
    assert!(response.contains("\"code\":\"not_found\""), "{response}");
}
