//! `gravis`: run scenarios, replay traces, serve the console socket and check lexicons.
//!
//! Exit status: 0 on success, 1 when a run fails or times out (or a replay
//! diverges, or the corpus check finds mismatches), 2 on usage or input errors.

mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use gravis_core::harness::{self, Outcome, RecordedTrace, Scenario};
use gravis_core::language::{check_corpus, parse_corpus, Lexicon};

#[derive(Parser)]
#[command(name = "gravis", version, about = "Deterministic multi-modal robot instruction simulator")]
struct Cli {
    /// JSON config patch applied to the built-in defaults (overrides GRAVIS_CONFIG).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario to completion and record its trace.
    Run {
        #[arg(long, value_name = "FILE")]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        trace_out: Option<PathBuf>,
        #[arg(long, value_name = "MS")]
        max_sim_time: Option<u64>,
    },
    /// Re-run the scenario recorded in a trace and compare envelope logs.
    Replay {
        #[arg(long, value_name = "FILE")]
        trace: PathBuf,
    },
    /// Open the console WebSocket endpoint.
    Serve {
        #[arg(long)]
        port: u16,
        /// Scenario to start from; defaults to a three-object table with no script.
        #[arg(long, value_name = "FILE")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulation speed relative to wall-clock time.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Parse every corpus utterance and compare against its gold frame.
    LexiconCheck {
        #[arg(long, value_name = "FILE")]
        lexicon: PathBuf,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
    },
}

/// Error with the exit status it maps to.
struct Fail(u8, String);

fn usage(msg: impl Into<String>) -> Fail {
    Fail(2, msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8, Fail> {
    let base = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Run { scenario, seed, trace_out, max_sim_time } => run(&scenario, seed, trace_out.as_deref(), max_sim_time, base),
        Command::Replay { trace } => replay(&trace),
        Command::Serve { port, scenario, seed, speed } => {
            if !(speed > 0.0) {
                return Err(usage("--speed must be positive"));
            }
            let scenario = match scenario {
                Some(path) => load_scenario(&path, seed)?,
                None => serve::default_scenario(seed.unwrap_or(0)),
            };
            serve::serve(port, scenario, base, speed).map_err(|e| Fail(2, e))?;
            Ok(0)
        }
        Command::LexiconCheck { lexicon, corpus } => lexicon_check(&lexicon, &corpus),
    }
}

fn base_config(flag: Option<&Path>) -> Result<Value, Fail> {
    let (path, source) = match (flag, std::env::var_os("GRAVIS_CONFIG")) {
        (Some(p), _) => (p.to_path_buf(), "--config"),
        (None, Some(p)) => (PathBuf::from(p), "GRAVIS_CONFIG"),
        (None, None) => return Ok(Value::Null),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{source}: cannot read {}: {e}", path.display())))?;
    let patch: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{source}: {}: {e}", path.display())))?;
    gravis_core::Config::default().patched(&patch).map_err(|e| usage(format!("{source}: {e}")))?;
    Ok(patch)
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Fail> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("--scenario: cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("--scenario: {}: {e}", path.display())))?;
    Scenario::from_value(value, seed).map_err(|e| usage(format!("--scenario: {}: {e}", path.display())))
}

fn run(path: &Path, seed: Option<u64>, trace_out: Option<&Path>, max_sim_time: Option<u64>, base: Value) -> Result<u8, Fail> {
    let mut scenario = load_scenario(path, seed)?;
    if max_sim_time.is_some() {
        scenario.max_sim_time = max_sim_time;
    }
    let trace = harness::run(scenario, &base).map_err(|e| Fail(1, format!("run failed: {e}")))?;
    if let Some(out) = trace_out {
        trace.write(out).map_err(|e| usage(format!("--trace-out: cannot write {}: {e}", out.display())))?;
    }
    let f = &trace.footer;
    println!(
        "outcome: {} at {} ms, {} envelopes, stages {:?}",
        serde_json::to_value(f.outcome).unwrap().as_str().unwrap_or("?"),
        f.sim_time,
        f.envelopes,
        f.stages
    );
    Ok(match f.outcome {
        Outcome::Completed => 0,
        Outcome::Failed | Outcome::Timeout => 1,
    })
}

fn replay(path: &Path) -> Result<u8, Fail> {
    let recorded = RecordedTrace::from_file(path).map_err(|e| usage(format!("--trace: {}: {e}", path.display())))?;
    let report = harness::replay(&recorded).map_err(|e| Fail(1, format!("replay failed: {e}")))?;
    println!("{report}");
    Ok(if report.identical() { 0 } else { 1 })
}

fn lexicon_check(lexicon: &Path, corpus: &Path) -> Result<u8, Fail> {
    let lex = Lexicon::from_file(lexicon).map_err(|e| usage(format!("--lexicon: {}: {e}", lexicon.display())))?;
    let text = std::fs::read_to_string(corpus)
        .map_err(|e| usage(format!("--corpus: cannot read {}: {e}", corpus.display())))?;
    let entries = parse_corpus(&text).map_err(|e| usage(format!("--corpus: {}: {e}", corpus.display())))?;
    let mismatches = check_corpus(&entries, &lex);
    let show = |g: &Option<gravis_core::language::GoldFrame>| match g {
        Some(g) => serde_json::to_string(g).unwrap_or_default(),
        None => "ERROR".into(),
    };
    for m in &mismatches {
        println!("line {}: {:?}", m.line, m.utterance);
        println!("  expected {}", show(&m.expected));
        println!("  got      {}", show(&m.got));
    }
    println!("{}/{} utterances match", entries.len() - mismatches.len(), entries.len());
    Ok(if mismatches.is_empty() { 0 } else { 1 })
}
