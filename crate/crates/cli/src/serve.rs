//! Console endpoint: a WebSocket that streams every bus envelope and periodic
//! state snapshots, and accepts typed utterances, table clicks and direct
//! commands.
//!
//! Client to server:
//!   {"type": "utterance", "text": "..."}
//!   {"type": "point", "x_mm": 200, "y_mm": 300}
//!   {"type": "control", "cmd": "..."}
//! Server to client:
//!   {"type": "hello", "topics": {...}, "config_hash": "..."}
//!   {"type": "envelope", "envelope": {...}}
//!   {"type": "snapshot", "snapshot": {...}}
//!   {"type": "error", "message": "..."}
//!
//! Simulated time only advances while a client is connected.

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::time::Duration;

use serde_json::{json, Value};
use tungstenite::{Message as WsMessage, WebSocket};

use gravis_core::harness::{Scenario, ScriptAction, Session};
use gravis_core::Config;

pub fn default_scenario(seed: u64) -> Scenario {
    let value = json!({
        "name": "console",
        "seed": seed,
        "scene": {
            "objects": [
                {"id": "red-cube", "kind": "cube", "color": "red", "position": [400, 500]},
                {"id": "blue-bar", "kind": "bar", "color": "blue", "position": [250, 450], "major_axis_angle": 0.4},
                {"id": "yellow-bolt", "kind": "bolt", "color": "yellow", "position": [560, 420]}
            ]
        }
    });
    Scenario::from_value(value, None).expect("built-in scenario is valid")
}

/// Parses one client message into a scripted action.
pub fn parse_client(text: &str) -> Result<ScriptAction, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let field = |k: &str| v.get(k).ok_or_else(|| format!("missing `{k}`"));
    match v.get("type").and_then(Value::as_str) {
        Some("utterance") => {
            let text = field("text")?.as_str().ok_or("`text` must be a string")?;
            Ok(ScriptAction::Utterance { text: text.to_string() })
        }
        Some("point") => {
            let x = field("x_mm")?.as_f64().ok_or("`x_mm` must be a number")?;
            let y = field("y_mm")?.as_f64().ok_or("`y_mm` must be a number")?;
            Ok(ScriptAction::Point { x, y })
        }
        Some("control") => {
            let cmd = field("cmd")?.as_str().ok_or("`cmd` must be a string")?;
            Ok(ScriptAction::Control { cmd: cmd.to_string() })
        }
        Some(other) => Err(format!("unknown message type `{other}`")),
        None => Err("missing `type`".into()),
    }
}

pub fn serve(port: u16, scenario: Scenario, base: Value, speed: f64) -> Result<(), String> {
    let base = Config::default().patched(&base).map_err(|e| e.to_string())?;
    let mut session = Session::new(scenario, &base).map_err(|e| e.to_string())?;
    let listener = TcpListener::bind(("127.0.0.1", port)).map_err(|e| format!("--port: cannot bind {port}: {e}"))?;
    eprintln!("listening on ws://127.0.0.1:{port}");
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        match tungstenite::accept(stream) {
            Ok(ws) => {
                if let Err(e) = client_loop(ws, &mut session, speed) {
                    eprintln!("client disconnected: {e}");
                }
            }
            Err(e) => eprintln!("handshake failed: {e}"),
        }
    }
    Ok(())
}

fn send(ws: &mut WebSocket<TcpStream>, v: &Value) -> tungstenite::Result<()> {
    ws.send(WsMessage::text(v.to_string()))
}

fn client_loop(mut ws: WebSocket<TcpStream>, session: &mut Session, speed: f64) -> Result<(), String> {
    let err = |e: tungstenite::Error| e.to_string();
    ws.get_mut().set_read_timeout(Some(Duration::from_millis(1))).map_err(|e| e.to_string())?;
    let cfg = session.config().clone();
    send(&mut ws, &json!({"type": "hello", "topics": session.topics(), "config_hash": cfg.hash()})).map_err(err)?;
    send(&mut ws, &json!({"type": "snapshot", "snapshot": session.snapshot()})).map_err(err)?;
    let tick = Duration::from_secs_f64(cfg.harness.tick_ms as f64 / 1000.0 / speed);
    let mut sent = session.log().len();
    let mut last_snapshot = session.now();
    loop {
        loop {
            match ws.read() {
                Ok(WsMessage::Text(text)) => match parse_client(text.as_str()) {
                    Ok(action) => session.inject(action),
                    Err(e) => send(&mut ws, &json!({"type": "error", "message": e})).map_err(err)?,
                },
                Ok(WsMessage::Close(_)) => return Ok(()),
                Ok(_) => {}
                Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => break,
                Err(tungstenite::Error::ConnectionClosed) => return Ok(()),
                Err(e) => return Err(err(e)),
            }
        }
        session.step_tick().map_err(|e| e.to_string())?;
        for env in &session.log()[sent..] {
            send(&mut ws, &json!({"type": "envelope", "envelope": &**env})).map_err(err)?;
        }
        sent = session.log().len();
        if session.now() >= last_snapshot + cfg.harness.snapshot_interval_ms {
            last_snapshot = session.now();
            send(&mut ws, &json!({"type": "snapshot", "snapshot": session.snapshot()})).map_err(err)?;
        }
        std::thread::sleep(tick);
    }
}
