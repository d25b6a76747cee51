//! Payloads carried on the bus between the actors of a run.

use serde::{Deserialize, Serialize};

use crate::attention::Fixation;
use crate::bus::Payload;
use crate::dialog::{DialogAct, DialogStateKind, FusionRequest, Purpose};
use crate::fusion::Ambiguity;
use crate::gesture::PointingResult;
use crate::grid::Grid;
use crate::language::InstructionFrame;
use crate::manipulation::{Actuator, ArmMode, Feedback, HandState, ManipCommand, Operation};
use crate::memory::{Blob, HypothesisId, MemorySnapshot};
use crate::types::Color;
use crate::worldsim::WorldEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldMsg {
    pub event: WorldEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationMsg {
    pub fixation: Fixation,
    /// Blob detector reading at the fixated cell.
    pub blob: Option<Blob>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureMsg {
    pub pointing: PointingResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationMapMsg {
    pub target: [f64; 2],
    pub radius: f64,
    pub map: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMsg {
    pub color: Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMsg {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMsg {
    /// Text as typed.
    pub raw: String,
    /// Text after simulated recognition errors.
    pub heard: String,
    pub frame: Option<InstructionFrame>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFrameMsg {
    pub frame: InstructionFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshotMsg {
    pub snapshot: MemorySnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResultMsg {
    pub purpose: Purpose,
    pub status: Ambiguity,
    pub io: Option<HypothesisId>,
    pub ro: Vec<HypothesisId>,
    pub position: Option<[f64; 2]>,
    pub posterior: Option<f64>,
    pub marginals: Vec<(HypothesisId, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogActMsg {
    pub act: DialogAct,
    pub state: DialogStateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipCommandMsg {
    pub command: ManipCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManipStatus {
    Progress,
    Succeeded,
    Failed,
    /// The command was refused before any motion.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipFeedbackMsg {
    pub op: Operation,
    pub status: ManipStatus,
    pub attempts: u32,
    pub arm: ArmMode,
    pub hand: HandState,
    pub feedback: Option<Feedback>,
    pub actuator: Option<Actuator>,
    pub reason: Option<String>,
    /// Final object position on success.
    pub position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMsg {
    pub cmd: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMsg {
    pub stage: u8,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    World(WorldMsg),
    Fixation(FixationMsg),
    Gesture(GestureMsg),
    ManipulationMap(ManipulationMapMsg),
    Bias(BiasMsg),
    Utterance(UtteranceMsg),
    Frame(FrameMsg),
    ResolvedFrame(ResolvedFrameMsg),
    Memory(MemorySnapshotMsg),
    FusionRequest(FusionRequest),
    FusionResult(FusionResultMsg),
    DialogAct(DialogActMsg),
    ManipCommand(ManipCommandMsg),
    ManipFeedback(ManipFeedbackMsg),
    Control(ControlMsg),
    Stage(StageMsg),
}

impl Payload for Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::World(_) => "WorldMsg",
            Message::Fixation(_) => "FixationMsg",
            Message::Gesture(_) => "GestureMsg",
            Message::ManipulationMap(_) => "ManipulationMapMsg",
            Message::Bias(_) => "BiasMsg",
            Message::Utterance(_) => "UtteranceMsg",
            Message::Frame(_) => "FrameMsg",
            Message::ResolvedFrame(_) => "ResolvedFrameMsg",
            Message::Memory(_) => "MemorySnapshotMsg",
            Message::FusionRequest(_) => "FusionRequestMsg",
            Message::FusionResult(_) => "FusionResultMsg",
            Message::DialogAct(_) => "DialogActMsg",
            Message::ManipCommand(_) => "ManipCommandMsg",
            Message::ManipFeedback(_) => "ManipFeedbackMsg",
            Message::Control(_) => "ControlMsg",
            Message::Stage(_) => "StageMsg",
        }
    }
}

/// Topic name and payload kind of every topic of a run, in registration order.
pub const TOPICS: [(&str, &str); 16] = [
    ("world", "WorldMsg"),
    ("fixation", "FixationMsg"),
    ("gesture", "GestureMsg"),
    ("manipulation-map", "ManipulationMapMsg"),
    ("bias", "BiasMsg"),
    ("utterance", "UtteranceMsg"),
    ("frame", "FrameMsg"),
    ("resolved-frame", "ResolvedFrameMsg"),
    ("memory", "MemorySnapshotMsg"),
    ("fusion-request", "FusionRequestMsg"),
    ("fusion-result", "FusionResultMsg"),
    ("dialog-act", "DialogActMsg"),
    ("manip-command", "ManipCommandMsg"),
    ("manip-feedback", "ManipFeedbackMsg"),
    ("control", "ControlMsg"),
    ("stage", "StageMsg"),
];
