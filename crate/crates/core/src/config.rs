//! Tunable constants for every module, grouped per module.
//!
//! The effective configuration of a run is the compiled-in default, patched by
//! an optional config file (`GRAVIS_CONFIG` or `--config`), patched again by the
//! scenario's own `config` block. Patching is a recursive JSON object merge.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fusion::CptConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub grid: GridConfig,
    pub attention: AttentionConfig,
    pub gesture: GestureConfig,
    pub memory: MemoryConfig,
    pub language: LanguageConfig,
    pub fusion: FusionConfig,
    pub dialog: DialogConfig,
    pub manipulation: ManipulationConfig,
    pub harness: HarnessConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: GridConfig::default(),
            attention: AttentionConfig::default(),
            gesture: GestureConfig::default(),
            memory: MemoryConfig::default(),
            language: LanguageConfig::default(),
            fusion: FusionConfig::default(),
            dialog: DialogConfig::default(),
            manipulation: ManipulationConfig::default(),
            harness: HarnessConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { rows: 64, cols: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttentionConfig {
    pub w_default: f64,
    pub w_max: f64,
    pub w_bias: f64,
    /// Decay time constant of a color bias, ms.
    pub tau_ms: f64,
    /// Inhibition-of-return radius in cells.
    pub fadeout_radius: f64,
    /// Time for a fully suppressed fadeout cell to recover to 1.0, ms.
    pub recovery_ms: f64,
    pub theta_fix: f64,
    /// Residual under which a bias counts as decayed.
    pub bias_epsilon: f64,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            w_default: 1.0,
            w_max: 5.0,
            w_bias: 3.0,
            tau_ms: 5000.0,
            fadeout_radius: 4.0,
            recovery_ms: 2000.0,
            theta_fix: 1e-6,
            bias_epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GestureConfig {
    pub region_radius_mm: f64,
    /// Height above the target at which scripted `point` events place the fingertip.
    pub synth_height_mm: f64,
    /// Horizontal distance (towards the user) of a synthesized fingertip from its target.
    pub synth_reach_mm: f64,
}

impl Default for GestureConfig {
    fn default() -> Self {
        GestureConfig { region_radius_mm: 100.0, synth_height_mm: 250.0, synth_reach_mm: 150.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub k_confirm: u32,
    pub r_cluster_mm: f64,
    pub ttl_ms: u64,
    pub near_mm: f64,
    /// Probability that the simulated blob detector reports a wrong color.
    pub blob_mislabel_prob: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            k_confirm: 3,
            r_cluster_mm: 25.0,
            ttl_ms: 30_000,
            near_mm: 150.0,
            blob_mislabel_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LanguageConfig {
    /// Simulated recognizer error rate applied to every utterance.
    pub error_rate: f64,
    /// Optional lexicon file replacing the bundled one.
    pub lexicon_path: Option<String>,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        LanguageConfig { error_rate: 0.0, lexicon_path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub margin: f64,
    pub cpts: CptConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { margin: 0.2, cpts: CptConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DialogConfig {
    pub gesture_timeout_ms: u64,
    pub max_repeats: u32,
    pub templates: Templates,
}

impl Default for DialogConfig {
    fn default() -> Self {
        DialogConfig { gesture_timeout_ms: 10_000, max_repeats: 2, templates: Templates::default() }
    }
}

/// Surface text of the dialog acts that carry no situation-specific detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Templates {
    pub prompt: String,
    pub ask_repeat: String,
    pub ask_point: String,
    pub ask_deploy: String,
    pub confusion_reset: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            prompt: "Please give an instruction.".into(),
            ask_repeat: "Please repeat the instruction.".into(),
            ask_point: "Which one do you mean? Please point at it.".into(),
            ask_deploy: "Where should I put it? Please point at the location.".into(),
            confusion_reset: "I am confused. Please give a new instruction.".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManipulationConfig {
    pub delta_ref_mm: f64,
    pub delta_align_mm: f64,
    pub force_min_n: f64,
    pub force_max_n: f64,
    pub approach_ratio: f64,
    pub initial_offset_mm: f64,
    pub grasp_offset_mm: f64,
    pub force_target_n: f64,
    pub force_ramp_steps: u32,
    /// Grasp steps without reaching the force window before the grasp counts as failed.
    pub grasp_timeout_steps: u32,
    pub max_attempts: u32,
    pub kind_mislabel_prob: f64,
    /// Hard cap on feedback steps for one command.
    pub max_steps: u32,
    /// Largest distance between a memory hypothesis and the scene object it designates.
    pub match_radius_mm: f64,
}

impl Default for ManipulationConfig {
    fn default() -> Self {
        ManipulationConfig {
            delta_ref_mm: 40.0,
            delta_align_mm: 10.0,
            force_min_n: 1.0,
            force_max_n: 5.0,
            approach_ratio: 0.4,
            initial_offset_mm: 100.0,
            grasp_offset_mm: 30.0,
            force_target_n: 2.5,
            force_ramp_steps: 3,
            grasp_timeout_steps: 6,
            max_attempts: 2,
            kind_mislabel_prob: 0.0,
            max_steps: 60,
            match_radius_mm: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub tick_ms: u64,
    pub max_sim_time_ms: u64,
    pub snapshot_interval_ms: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { tick_ms: 50, max_sim_time_ms: 120_000, snapshot_interval_ms: 100 }
    }
}

impl Config {
    /// Applies a JSON patch on top of `self`.
    pub fn patched(&self, patch: &Value) -> Result<Config> {
        if patch.is_null() {
            return Ok(self.clone());
        }
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, patch);
        let cfg: Config = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Config> {
        let patch: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Config::default().patched(&patch)
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.attention;
        if !(0.0..=a.w_max).contains(&a.w_default) || !(0.0..=a.w_max).contains(&a.w_bias) {
            return Err(Error::Config("attention weights must lie in [0, w_max]".into()));
        }
        if a.tau_ms <= 0.0 || a.recovery_ms <= 0.0 {
            return Err(Error::Config("attention time constants must be positive".into()));
        }
        if self.grid.rows == 0 || self.grid.cols == 0 {
            return Err(Error::Config("grid dims must be positive".into()));
        }
        if self.gesture.region_radius_mm <= 0.0 {
            return Err(Error::Config("region radius must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.language.error_rate) {
            return Err(Error::Config("language.error_rate must be in [0, 1]".into()));
        }
        if self.harness.tick_ms == 0 {
            return Err(Error::Config("harness.tick_ms must be positive".into()));
        }
        if self.manipulation.max_attempts == 0 {
            return Err(Error::Config("manipulation.max_attempts must be >= 1".into()));
        }
        self.fusion.cpts.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes).as_slice())
    }
}

fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn patch_overrides_nested_field_only() {
        let cfg = Config::default()
            .patched(&json!({"attention": {"tau_ms": 1000.0}}))
            .unwrap();
        assert_eq!(cfg.attention.tau_ms, 1000.0);
        assert_eq!(cfg.attention.w_bias, 3.0);
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(Config::default().patched(&json!({"attention": {"nope": 1}})).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let b = a.patched(&json!({"harness": {"tick_ms": 25}})).unwrap();
        assert_eq!(a.hash(), Config::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
