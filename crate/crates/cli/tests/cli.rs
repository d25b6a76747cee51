use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(format!("{name}.json"))
}

fn gravis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gravis")).args(args).env_remove("GRAVIS_CONFIG").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn completed_run_exits_zero_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let o = gravis(&["run", "--scenario", s(&scenario("canonical")), "--trace-out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("outcome: completed"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("{\"type\":\"header\""));
    assert!(text.trim_end().lines().last().unwrap().starts_with("{\"type\":\"footer\""));
}

#[test]
fn failed_and_timed_out_runs_exit_one() {
    let o = gravis(&["run", "--scenario", s(&scenario("double_slip"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("outcome: failed"));
    let o = gravis(&["run", "--scenario", s(&scenario("canonical")), "--max-sim-time", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("outcome: timeout"));
}

#[test]
fn replay_reports_identity_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    assert_eq!(gravis(&["run", "--scenario", s(&scenario("canonical")), "--trace-out", s(&out)]).status.code(), Some(0));

    let o = gravis(&["replay", "--trace", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("identical ("));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let idx = lines.iter().position(|l| l.contains("\"topic\":\"dialog-act\"")).unwrap();
    lines[idx] = lines[idx].replace("\"text\":\"", "\"text\":\"x");
    let tampered = dir.path().join("tampered.jsonl");
    std::fs::write(&tampered, lines.join("\n")).unwrap();
    let o = gravis(&["replay", "--trace", s(&tampered)]);
    assert_eq!(o.status.code(), Some(1));
    // header is line 0, so envelope i sits on line i + 1
    assert!(stdout(&o).contains(&format!("divergence at envelope {} (topic dialog-act", idx - 1)), "{}", stdout(&o));
}

#[test]
fn seed_flag_overrides_scenario_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    gravis(&["run", "--scenario", s(&scenario("noisy")), "--trace-out", s(&a)]);
    gravis(&["run", "--scenario", s(&scenario("noisy")), "--seed", "2", "--trace-out", s(&b)]);
    let hb = std::fs::read_to_string(&b).unwrap();
    assert!(hb.lines().next().unwrap().contains("\"seed\":2"));
    assert_ne!(std::fs::read_to_string(&a).unwrap(), hb);
    assert_eq!(gravis(&["replay", "--trace", s(&b)]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two_and_name_the_flag() {
    let o = gravis(&["run", "--scenario", "does-not-exist.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--scenario"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seed": 1, "scene": {}, "script": [{"t": 0, "type": "wave"}]}"#).unwrap();
    let o = gravis(&["run", "--scenario", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--scenario"));

    std::fs::write(&bad, r#"{"attention": {"no_such_field": 1}}"#).unwrap();
    let o = gravis(&["--config", s(&bad), "run", "--scenario", s(&scenario("canonical"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));

    let o = gravis(&["replay", "--trace", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--trace"));

    assert_eq!(gravis(&[]).status.code(), Some(2));
    assert_eq!(gravis(&["serve", "--port", "0", "--speed", "0"]).status.code(), Some(2));
}

#[test]
fn config_from_environment_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"harness": {"tick_ms": 25}}"#).unwrap();
    let out = dir.path().join("t.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_gravis"))
        .args(["run", "--scenario", s(&scenario("canonical")), "--trace-out", s(&out)])
        .env("GRAVIS_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let header = std::fs::read_to_string(&out).unwrap().lines().next().unwrap().to_string();
    assert!(header.contains("\"base_config\":{\"harness\":{\"tick_ms\":25}}"));
    assert_eq!(gravis(&["replay", "--trace", s(&out)]).status.code(), Some(0));
}

#[test]
fn lexicon_check_reports_matches_and_mismatches() {
    let data = root().join("crates/core/data");
    let lex = data.join("lexicon.tsv");
    let o = gravis(&["lexicon-check", "--lexicon", s(&lex), "--corpus", s(&data.join("corpus.tsv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let summary = stdout(&o);
    let last = summary.lines().last().unwrap();
    assert!(last.ends_with("utterances match"));
    let (ok, total) = last.split_whitespace().next().unwrap().split_once('/').unwrap();
    assert_eq!(ok, total);

    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.tsv");
    std::fs::write(&corpus, "take the red cube\t{\"action\": \"put\", \"intended\": {\"type\": \"cube\", \"color\": \"red\"}, \"anaphoric\": false, \"references\": []}\n").unwrap();
    let o = gravis(&["lexicon-check", "--lexicon", s(&lex), "--corpus", s(&corpus)]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("0/1 utterances match"));
}
