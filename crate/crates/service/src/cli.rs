//! The `timecrit` command line. Every command prints one JSON document to
//! standard output; errors are printed as `{code, message, path}` objects.
//! Exit status is 0 on success, 1 when the input fails validation and 2 on
//! usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use timecrit::bayes::{posterior, value_of_information, Evidence};
use timecrit::ecda::{
    best_action, comprehensive_ecda, criticality, ecda, ecda_with_duration_uncertainty, ecdm,
    ActionPredictor, DecisionProblem, DEFAULT_CRITICALITY_STEP,
};
use timecrit::tdutility::TimeDistribution;

use crate::assessment::differential;
use crate::error::{ErrorCode, ServiceError};
use crate::model::ModelBundle;
use crate::scenario::{self, ModelResolver};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "timecrit", version, about = "Time-critical decision support from the command line")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate { model: PathBuf },
    /// Posterior over the hypothesis variables (or one target) given evidence.
    Infer {
        model: PathBuf,
        /// Findings as variable=state.
        #[arg(long, value_parser = parse_assignment, num_args = 1..)]
        evidence: Vec<(String, String)>,
        #[arg(long)]
        target: Option<String>,
    },
    /// Expected cost of delaying action from --t-o until --t.
    Ecda {
        model: PathBuf,
        #[arg(long, value_parser = parse_assignment, num_args = 1..)]
        evidence: Vec<(String, String)>,
        /// Delayed action time, minutes of process duration.
        #[arg(long = "t")]
        t: f64,
        /// Time of immediate action.
        #[arg(long = "t-o", default_value_t = 0.0)]
        t_o: f64,
        /// Onset belief as time:probability pairs, e.g. "0:0.5,30:0.5".
        #[arg(long, value_parser = parse_onset)]
        onset: Option<TimeDistribution>,
        #[arg(long)]
        context: Option<String>,
    },
    /// Rank every feasible transport plan of a scenario file.
    Plan { scenario: PathBuf },
    /// Value of information of each unobserved finding at time --t.
    Voi {
        model: PathBuf,
        #[arg(long, value_parser = parse_assignment, num_args = 1..)]
        evidence: Vec<(String, String)>,
        #[arg(long = "t")]
        t: f64,
        #[arg(long)]
        context: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn parse_assignment(raw: &str) -> Result<(String, String), String> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
            Ok((k.trim().to_string(), v.trim().to_string()))
        }
        _ => Err(format!("`{raw}` is not of the form variable=state")),
    }
}

fn parse_onset(raw: &str) -> Result<TimeDistribution, String> {
    let atoms = raw
        .split(',')
        .map(|pair| {
            let (t, p) = pair
                .split_once(':')
                .ok_or_else(|| format!("`{pair}` is not of the form time:probability"))?;
            let t: f64 = t.trim().parse().map_err(|_| format!("`{t}` is not a number"))?;
            let p: f64 = p.trim().parse().map_err(|_| format!("`{p}` is not a number"))?;
            Ok((t, p))
        })
        .collect::<Result<Vec<_>, String>>()?;
    TimeDistribution::from_atoms(atoms).map_err(|e| e.to_string())
}

/// Exit status for an error.
pub fn exit_code(error: &ServiceError) -> i32 {
    match error.code {
        ErrorCode::UsageError => 2,
        _ => 1,
    }
}

fn usage(message: impl Into<String>) -> ServiceError {
    ServiceError::new(ErrorCode::UsageError, "", message)
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load_bundle(path: &Path) -> Result<ModelBundle, ServiceError> {
    ModelBundle::from_json(&read(path)?)
}

fn evidence_of(pairs: &[(String, String)]) -> Evidence {
    let mut ev = Evidence::new();
    for (k, v) in pairs {
        ev.observe(k, v, 0.0);
    }
    ev
}

fn to_json(value: &impl Serialize) -> Value {
    serde_json::to_value(value).expect("outputs serialize")
}

/// Resolves scenario model references as paths relative to the scenario.
struct FileModels {
    base: PathBuf,
}

impl ModelResolver for FileModels {
    fn resolve(&self, reference: &str) -> Result<Arc<ModelBundle>, ServiceError> {
        let path = self.base.join(reference);
        let bytes = std::fs::read(&path)
            .map_err(|e| ServiceError::not_found("model", &format!("{} ({e})", path.display())))?;
        Ok(Arc::new(ModelBundle::from_json(&bytes)?))
    }
}

/// Runs the command line, writing the JSON result to `out`, and returns the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            return emit_error(out, &usage(e.to_string().trim().to_string()));
        }
    };
    let result = match cli.command {
        Command::Serve { port, host } => serve(SocketAddr::new(host, port), out),
        command => execute(command),
    };
    match result {
        Ok(value) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("json"));
            0
        }
        Err(e) => emit_error(out, &e),
    }
}

fn emit_error(out: &mut dyn Write, error: &ServiceError) -> i32 {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(error).expect("json"));
    exit_code(error)
}

fn execute(command: Command) -> Result<Value, ServiceError> {
    match command {
        Command::Validate { model } => {
            let b = load_bundle(&model)?;
            Ok(json!({
                "valid": true,
                "id": b.id(),
                "meta": b.meta(),
                "variables": b.net().len(),
                "hypotheses": b.hypotheses(),
                "actions": b.utility().actions(),
                "contexts": b.utility().contexts().iter().map(|c| c.name()).collect::<Vec<_>>(),
            }))
        }
        Command::Infer { model, evidence, target } => {
            let b = load_bundle(&model)?;
            let ev = evidence_of(&evidence);
            let targets = match &target {
                Some(t) => vec![t.as_str()],
                None => b.hypotheses(),
            };
            let posteriors = targets
                .into_iter()
                .map(|t| Ok(to_json(&differential(&posterior(b.net(), t, &ev)?))))
                .collect::<Result<Vec<_>, ServiceError>>()?;
            Ok(json!({ "model": b.id(), "evidence": ev, "posteriors": posteriors }))
        }
        Command::Ecda { model, evidence, t, t_o, onset, context } => {
            let b = load_bundle(&model)?;
            let ev = evidence_of(&evidence);
            let post = posterior(b.net(), b.utility().hypothesis(), &ev)?;
            let dp = DecisionProblem::new(&post, b.utility())?
                .with_context(context.as_deref())?
                .with_reference_time(t_o)?;
            let mut report = json!({
                "model": b.id(),
                "evidence": ev,
                "posterior": differential(&post),
                "t_o": t_o,
                "t": t,
                "best_action_at_t_o": best_action(&dp, t_o)?,
                "best_action_at_t": best_action(&dp, t)?,
                "ecda": ecda(&dp, t)?,
                "ecdm_uniform": ecdm(&dp, &ActionPredictor::Uniform, t)?,
                "criticality_at_t_o": criticality(&dp, t_o, DEFAULT_CRITICALITY_STEP)?,
            });
            if let Some(onset) = onset {
                report["onset"] = to_json(&onset);
                report["comprehensive_ecda"] = json!(comprehensive_ecda(&dp, &onset)?);
                report["ecda_duration_uncertain"] = json!(ecda_with_duration_uncertainty(&dp, &onset, t - t_o)?);
            }
            Ok(report)
        }
        Command::Plan { scenario } => {
            let bytes = read(&scenario)?;
            let base = scenario.parent().map(Path::to_path_buf).unwrap_or_default();
            let ranked = scenario::evaluate_scenario(&bytes, &FileModels { base })?;
            Ok(to_json(&ranked))
        }
        Command::Voi { model, evidence, t, context } => {
            let b = load_bundle(&model)?;
            let ev = evidence_of(&evidence);
            let candidates: Vec<&str> = b.findings().into_iter().filter(|f| !ev.contains(f)).collect();
            let report =
                value_of_information(b.net(), b.utility().hypothesis(), &ev, candidates, b.utility(), t, context.as_deref())?;
            Ok(to_json(&report))
        }
        Command::Serve { .. } => unreachable!("serve is handled by run"),
    }
}

fn serve(addr: SocketAddr, out: &mut dyn Write) -> Result<Value, ServiceError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| ServiceError::new(ErrorCode::Internal, "", e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| usage(format!("cannot listen on {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(|e| ServiceError::new(ErrorCode::Internal, "", e.to_string()))?;
        let _ = writeln!(out, "{}", json!({ "listening": bound.to_string() }));
        let _ = out.flush();
        axum::serve(listener, crate::http::router(Arc::new(Store::new())))
            .await
            .map_err(|e| ServiceError::new(ErrorCode::Internal, "", e.to_string()))?;
        Ok(json!({ "stopped": true }))
    })
}
