//! JSON-in, JSON-out operations behind the Python functions.

use serde_json::{json, Value};

use gravis_core::dialog::{transition, DialogEvent, DialogState};
use gravis_core::fusion::{self, ambiguity_check};
use gravis_core::gesture::PointingResult;
use gravis_core::harness::{self, Outcome, RecordedTrace, Scenario, Session, Trace};
use gravis_core::language::{self, InstructionFrame, Lexicon};
use gravis_core::memory::MemorySnapshot;
use gravis_core::Config;

type Result<T> = std::result::Result<T, String>;

fn parse<T: serde::de::DeserializeOwned>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))
}

fn config_patch(config: Option<&str>) -> Result<Value> {
    config.map_or(Ok(Value::Null), |c| parse("config", c))
}

fn scenario(text: &str, seed: Option<u64>) -> Result<Scenario> {
    Scenario::from_value(parse("scenario", text)?, seed).map_err(|e| e.to_string())
}

pub fn outcome_name(outcome: Outcome) -> String {
    serde_json::to_value(outcome).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn run(scenario_text: &str, seed: Option<u64>, config: Option<&str>) -> Result<Trace> {
    harness::run(scenario(scenario_text, seed)?, &config_patch(config)?).map_err(|e| e.to_string())
}

pub fn session(scenario_text: &str, seed: Option<u64>, config: Option<&str>) -> Result<Session> {
    let base = Config::default().patched(&config_patch(config)?).map_err(|e| e.to_string())?;
    Session::new(scenario(scenario_text, seed)?, &base).map_err(|e| e.to_string())
}

pub fn replay(trace: &str) -> Result<Value> {
    let recorded = RecordedTrace::parse(trace).map_err(|e| e.to_string())?;
    let report = harness::replay(&recorded).map_err(|e| e.to_string())?;
    let mut v = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    v["identical"] = report.identical().into();
    v["hash_mismatch"] = report.hash_mismatch().into();
    v["summary"] = report.to_string().into();
    Ok(v)
}

pub fn understand(utterance: &str, lexicon: Option<&str>) -> Result<Value> {
    let lex = match lexicon {
        Some(text) => Lexicon::parse(text).map_err(|e| e.to_string())?,
        None => Lexicon::default(),
    };
    let frame = language::understand(utterance, &lex).map_err(|e| e.to_string())?;
    serde_json::to_value(frame).map_err(|e| e.to_string())
}

pub fn fuse(snapshot: &str, frame: &str, region: Option<&str>, margin: Option<f64>) -> Result<Value> {
    let snapshot: MemorySnapshot = parse("snapshot", snapshot)?;
    let frame: InstructionFrame = parse("frame", frame)?;
    let region: Option<PointingResult> = region.map(|r| parse("region", r)).transpose()?;
    let cfg = Config::default().fusion;
    let net = fusion::build(&snapshot, &frame, &cfg.cpts, region.as_ref()).map_err(|e| e.to_string())?;
    let result = fusion::map_inference(&net);
    let status = ambiguity_check(&result, margin.unwrap_or(cfg.margin));
    Ok(match result {
        Ok(out) => json!({"status": status, "io": out.io, "ro": out.ro, "posterior": out.posterior, "marginals": out.marginals}),
        Err(e) => json!({"status": status, "error": e.to_string()}),
    })
}

pub fn dialog_step(state: Option<&str>, event: &str) -> Result<Value> {
    let state: DialogState = state.map_or(Ok(DialogState::default()), |s| parse("state", s))?;
    let event: DialogEvent = parse("event", event)?;
    let t = transition(&state, &event, &Config::default().dialog);
    serde_json::to_value(t).map_err(|e| e.to_string())
}
