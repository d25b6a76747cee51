//! JSON Lines traces: a header line, one line per envelope, a footer line.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::scenario::Scenario;
use super::session::{Outcome, Session, TraceEnvelope};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::worldsim::Scene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "header")]
pub struct TraceHeader {
    pub topics: BTreeMap<String, String>,
    pub config_hash: String,
    pub seed: u64,
    /// Config file patch the run started from (before the scenario's own block).
    pub base_config: Value,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "footer")]
pub struct TraceFooter {
    pub outcome: Outcome,
    pub sim_time: u64,
    pub envelopes: usize,
    pub stages: Vec<u8>,
    pub final_scene: Scene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub envelopes: Vec<TraceEnvelope>,
    pub footer: TraceFooter,
}

impl Trace {
    pub fn outcome(&self) -> Outcome {
        self.footer.outcome
    }

    pub fn envelope_lines(&self) -> Vec<String> {
        self.envelopes.iter().map(|e| serde_json::to_string(e).expect("envelope serializes")).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for line in self.envelope_lines() {
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.footer).expect("footer serializes"));
        out.push('\n');
        out
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

/// A trace file split into its parts; envelope lines are kept verbatim.
#[derive(Debug, Clone)]
pub struct RecordedTrace {
    pub header: TraceHeader,
    pub lines: Vec<String>,
    pub footer: Option<TraceFooter>,
}

impl RecordedTrace {
    pub fn parse(text: &str) -> Result<RecordedTrace> {
        let mut lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.is_empty() {
            return Err(Error::Trace("empty trace".into()));
        }
        let header: TraceHeader =
            serde_json::from_str(lines.remove(0)).map_err(|e| Error::Trace(format!("header: {e}")))?;
        let footer = match lines.last() {
            Some(last) if serde_json::from_str::<Value>(last).ok().and_then(|v| v.get("type").cloned()) == Some("footer".into()) => {
                let f = serde_json::from_str(last).map_err(|e| Error::Trace(format!("footer: {e}")))?;
                lines.pop();
                Some(f)
            }
            _ => None,
        };
        Ok(RecordedTrace { header, lines: lines.into_iter().map(str::to_string).collect(), footer })
    }

    pub fn from_file(path: &std::path::Path) -> Result<RecordedTrace> {
        RecordedTrace::parse(&std::fs::read_to_string(path)?)
    }
}

/// Runs a scenario to the end and collects its trace. `base_config` is the
/// patch (possibly `null`) applied to the built-in defaults before the
/// scenario's own overrides.
pub fn run(scenario: Scenario, base_config: &Value) -> Result<Trace> {
    let base = Config::default().patched(base_config)?;
    let mut session = Session::new(scenario, &base)?;
    let outcome = session.run_to_end()?;
    Ok(finish(session, base_config.clone(), outcome))
}

pub(crate) fn finish(session: Session, base_config: Value, outcome: Outcome) -> Trace {
    let header = TraceHeader {
        topics: session.topics(),
        config_hash: session.config().hash(),
        seed: session.scenario().seed,
        base_config,
        scenario: session.scenario().clone(),
    };
    let envelopes: Vec<TraceEnvelope> = session.log().iter().map(|e| (**e).clone()).collect();
    let footer = TraceFooter {
        outcome,
        sim_time: session.now(),
        envelopes: envelopes.len(),
        stages: session.stages().to_vec(),
        final_scene: session.scene().clone(),
    };
    Trace { header, envelopes, footer }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    /// 0-based envelope index.
    pub index: usize,
    pub topic: Option<String>,
    pub publisher: Option<String>,
    pub seq: Option<u64>,
    pub recorded: Option<String>,
    pub replayed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub recorded_hash: String,
    pub current_hash: String,
    pub topics_match: bool,
    pub recorded_envelopes: usize,
    pub replayed_envelopes: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn hash_mismatch(&self) -> bool {
        self.recorded_hash != self.current_hash
    }

    pub fn identical(&self) -> bool {
        self.divergence.is_none()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.hash_mismatch() {
            writeln!(f, "warning: config hash mismatch (trace {}, current {})", self.recorded_hash, self.current_hash)?;
        }
        if !self.topics_match {
            writeln!(f, "warning: topic registry differs")?;
        }
        match &self.divergence {
            None => write!(f, "identical ({} envelopes)", self.recorded_envelopes),
            Some(d) => {
                write!(f, "divergence at envelope {}", d.index)?;
                if let (Some(topic), Some(seq)) = (&d.topic, d.seq) {
                    write!(f, " (topic {topic}, seq {seq}")?;
                    if let Some(p) = &d.publisher {
                        write!(f, ", publisher {p}")?;
                    }
                    write!(f, ")")?;
                }
                writeln!(f)?;
                writeln!(f, "  recorded: {}", d.recorded.as_deref().unwrap_or("<end of trace>"))?;
                write!(f, "  replayed: {}", d.replayed.as_deref().unwrap_or("<end of trace>"))
            }
        }
    }
}

/// Re-runs the scenario in the header and compares envelope lines.
pub fn replay(recorded: &RecordedTrace) -> Result<ReplayReport> {
    let trace = run(recorded.header.scenario.clone(), &recorded.header.base_config)?;
    let fresh = trace.envelope_lines();
    let divergence = first_divergence(&recorded.lines, &fresh);
    Ok(ReplayReport {
        recorded_hash: recorded.header.config_hash.clone(),
        current_hash: trace.header.config_hash,
        topics_match: recorded.header.topics == trace.header.topics,
        recorded_envelopes: recorded.lines.len(),
        replayed_envelopes: fresh.len(),
        divergence,
    })
}

pub fn first_divergence(recorded: &[String], replayed: &[String]) -> Option<Divergence> {
    let n = recorded.len().max(replayed.len());
    let index = (0..n).find(|&i| recorded.get(i) != replayed.get(i))?;
    let rec = recorded.get(index).cloned();
    let rep = replayed.get(index).cloned();
    let locate = |line: &Option<String>| line.as_ref().and_then(|l| serde_json::from_str::<Value>(l).ok());
    let meta = locate(&rec).or_else(|| locate(&rep));
    let field = |k: &str| meta.as_ref().and_then(|v| v.get(k).cloned());
    Some(Divergence {
        index,
        topic: field("topic").and_then(|v| v.as_str().map(String::from)),
        publisher: field("publisher").and_then(|v| v.as_str().map(String::from)),
        seq: field("seq").and_then(|v| v.as_u64()),
        recorded: rec,
        replayed: rep,
    })
}
