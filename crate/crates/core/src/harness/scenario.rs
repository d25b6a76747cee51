//! Scenario files: an initial scene, a timed script of user inputs, config
//! overrides and the seed.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::memory::Viewpoint;
use crate::worldsim::{load_scene, HandState, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScriptAction {
    Utterance { text: String },
    /// Explicit hand pose; `null` removes the hand.
    Gesture { hand: Option<HandState> },
    /// A still pointing hand aimed at a table point.
    Point { x: f64, y: f64 },
    HandVanish,
    /// The next grasp slips.
    SlipInjection,
    Control { cmd: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    /// Sim time in ms.
    pub t: u64,
    #[serde(flatten)]
    pub action: ScriptAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scene: Scene,
    #[serde(default)]
    pub script: Vec<ScriptEvent>,
    /// Patch applied on top of the base configuration.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub config: Value,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sim_time: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewpoint: Option<Viewpoint>,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Scenario::from_value(value, None)
    }

    /// Parses a scenario, filling in or replacing the seed when `seed` is given.
    pub fn from_value(mut value: Value, seed: Option<u64>) -> Result<Scenario> {
        if let (Some(seed), Some(obj)) = (seed, value.as_object_mut()) {
            obj.insert("seed".into(), seed.into());
        }
        let scenario: Scenario = serde_json::from_value(value).map_err(|e| Error::Scenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_file(path: &std::path::Path, seed: Option<u64>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Scenario(e.to_string()))?;
        Scenario::from_value(value, seed)
    }

    pub fn validate(&self) -> Result<()> {
        load_scene(self.scene.clone())?;
        for pair in self.script.windows(2) {
            if pair[1].t < pair[0].t {
                return Err(Error::Scenario(format!("script time {} follows {}", pair[1].t, pair[0].t)));
            }
        }
        for ev in &self.script {
            if let ScriptAction::Gesture { hand: Some(hand) } = &ev.action {
                crate::worldsim::apply_event(&Scene::default(), &crate::worldsim::WorldEvent::HandAppear { hand: hand.clone() })?;
            }
        }
        Config::default().patched(&self.config)?;
        Ok(())
    }

    /// Effective configuration: `base` patched by the scenario's own overrides.
    pub fn effective_config(&self, base: &Config) -> Result<Config> {
        base.patched(&self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "scene": {"objects": [{"id": "a", "kind": "cube", "color": "red", "position": [100, 100]}]},
        "script": [{"t": 0, "type": "utterance", "text": "take the red cube"},
                   {"t": 50, "type": "point", "x": 100, "y": 100}],
        "seed": 7
    }"#;

    #[test]
    fn parses_minimal() {
        let s = Scenario::from_json_str(MINIMAL).unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.script[1].action, ScriptAction::Point { x: 100.0, y: 100.0 });
    }

    #[test]
    fn seed_is_required_unless_supplied() {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert!(Scenario::from_value(v.clone(), None).is_err());
        assert_eq!(Scenario::from_value(v, Some(3)).unwrap().seed, 3);
    }

    #[test]
    fn decreasing_times_rejected() {
        let text = MINIMAL.replace(r#""t": 50"#, r#""t": 0"#).replace(r#""t": 0, "type": "utterance""#, r#""t": 10, "type": "utterance""#);
        assert!(matches!(Scenario::from_json_str(&text), Err(Error::Scenario(_))));
    }

    #[test]
    fn bad_config_patch_rejected() {
        let text = MINIMAL.replace(r#""seed": 7"#, r#""seed": 7, "config": {"attention": {"bogus": 1}}"#);
        assert!(Scenario::from_json_str(&text).is_err());
    }
}
