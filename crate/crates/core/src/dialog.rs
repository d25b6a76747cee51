//! Dialog manager: a pure state machine combining instruction frames, fusion
//! results, gestures and manipulation feedback into dialog acts and commands.

use serde::{Deserialize, Serialize};

use crate::config::{DialogConfig, Templates};
use crate::error::{Error, Result};
use crate::gesture::PointingResult;
use crate::language::{Action, InstructionFrame, ObjectDescription};
use crate::manipulation::{ManipCommand, Operation};
use crate::memory::HypothesisId;
use crate::types::Color;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DialogStateKind {
    Idle,
    AwaitInstruction,
    Interpreting,
    AwaitGesture,
    Clarify,
    Executing,
    AwaitDeployLocation,
    Deploying,
    ReportSuccess,
    ReportError,
    Confused,
}

impl DialogStateKind {
    pub const ALL: [DialogStateKind; 11] = [
        DialogStateKind::Idle,
        DialogStateKind::AwaitInstruction,
        DialogStateKind::Interpreting,
        DialogStateKind::AwaitGesture,
        DialogStateKind::Clarify,
        DialogStateKind::Executing,
        DialogStateKind::AwaitDeployLocation,
        DialogStateKind::Deploying,
        DialogStateKind::ReportSuccess,
        DialogStateKind::ReportError,
        DialogStateKind::Confused,
    ];

    /// States the machine rests in between events; the report states are
    /// passed through on the way back to waiting for input.
    pub fn is_settled(self) -> bool {
        !matches!(self, DialogStateKind::ReportSuccess | DialogStateKind::ReportError)
    }

    fn is_busy(self) -> bool {
        matches!(self, DialogStateKind::Interpreting | DialogStateKind::Executing | DialogStateKind::Deploying)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    /// Which object the instruction is about.
    Intended,
    /// Which object marks the place to put the held object.
    Destination,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DialogContext {
    /// Anaphora referent.
    pub last_intended: Option<HypothesisId>,
    pub repetition_count: u32,
    pub pending_frame: Option<InstructionFrame>,
    pub pending_purpose: Option<Purpose>,
    /// The pending frame has already been asked to be repeated once after an
    /// empty fusion result.
    pub retried: bool,
    pub holding: Option<HypothesisId>,
    /// Latest pointing region not yet consumed by a fusion request.
    pub region: Option<PointingResult>,
    pub gesture_timeouts: u32,
    /// Intended object of the running pick.
    pub executing: Option<HypothesisId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogState {
    pub current: DialogStateKind,
    pub context: DialogContext,
}

impl Default for DialogState {
    fn default() -> Self {
        DialogState { current: DialogStateKind::Idle, context: DialogContext::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActKind {
    Prompt,
    AskRepeat,
    AskPoint,
    AskDeploy,
    Reject,
    ConfusionReset,
    Inform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogAct {
    pub kind: ActKind,
    pub text: String,
}

/// Surface text for an act; `detail` is used by the kinds without a fixed template.
pub fn render_act(kind: ActKind, detail: &str, templates: &Templates) -> String {
    match kind {
        ActKind::Prompt => templates.prompt.clone(),
        ActKind::AskRepeat => templates.ask_repeat.clone(),
        ActKind::AskPoint => templates.ask_point.clone(),
        ActKind::AskDeploy => templates.ask_deploy.clone(),
        ActKind::ConfusionReset => templates.confusion_reset.clone(),
        ActKind::Reject | ActKind::Inform => detail.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRequest {
    pub purpose: Purpose,
    pub frame: InstructionFrame,
    pub region: Option<PointingResult>,
    /// Hypotheses that may not be selected.
    pub exclude: Vec<HypothesisId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum DialogCommand {
    Bias { color: Color },
    Fuse(FusionRequest),
    Manip(ManipCommand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DialogEvent {
    FrameArrived(InstructionFrame),
    FrameUninterpretable { raw: String },
    FusionResolved { purpose: Purpose, io: HypothesisId, position: [f64; 2] },
    FusionAmbiguous { purpose: Purpose },
    FusionNone { purpose: Purpose },
    GestureArrived(PointingResult),
    ManipSuccess { op: Operation },
    ManipFailure { op: Operation, reason: String, rejected: bool },
    Timeout,
}

impl DialogEvent {
    /// One representative of every event kind, for exhaustive checks.
    pub fn samples() -> Vec<DialogEvent> {
        let frame = crate::language::understand("take the red cube", &crate::language::Lexicon::default())
            .expect("sample frame");
        let region = PointingResult { target: [400.0, 400.0], region_radius: 100.0, confidence: 1.0, clamped: false };
        vec![
            DialogEvent::FrameArrived(frame),
            DialogEvent::FrameUninterpretable { raw: "flobble".into() },
            DialogEvent::FusionResolved { purpose: Purpose::Intended, io: 1, position: [400.0, 400.0] },
            DialogEvent::FusionResolved { purpose: Purpose::Destination, io: 2, position: [200.0, 200.0] },
            DialogEvent::FusionAmbiguous { purpose: Purpose::Intended },
            DialogEvent::FusionNone { purpose: Purpose::Intended },
            DialogEvent::GestureArrived(region),
            DialogEvent::ManipSuccess { op: Operation::Pick },
            DialogEvent::ManipSuccess { op: Operation::Place },
            DialogEvent::ManipFailure { op: Operation::Pick, reason: "slip".into(), rejected: false },
            DialogEvent::ManipFailure { op: Operation::Pick, reason: "already held".into(), rejected: true },
            DialogEvent::Timeout,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: DialogState,
    /// Every state entered, including pass-through report states.
    pub visited: Vec<DialogStateKind>,
    pub acts: Vec<DialogAct>,
    pub commands: Vec<DialogCommand>,
    /// The instruction after anaphora resolution, when one was accepted.
    pub resolved_frame: Option<InstructionFrame>,
}

pub fn resolve_anaphora(frame: &InstructionFrame, context: &DialogContext) -> Result<InstructionFrame> {
    if !frame.anaphoric {
        return Ok(frame.clone());
    }
    let id = context.last_intended.ok_or(Error::UnresolvableReference)?;
    Ok(InstructionFrame { intended_id: Some(id), ..frame.clone() })
}

struct Builder<'a> {
    cfg: &'a DialogConfig,
    ctx: DialogContext,
    visited: Vec<DialogStateKind>,
    acts: Vec<DialogAct>,
    commands: Vec<DialogCommand>,
    resolved: Option<InstructionFrame>,
}

impl Builder<'_> {
    fn act(&mut self, kind: ActKind, detail: &str) {
        let text = render_act(kind, detail, &self.cfg.templates);
        self.acts.push(DialogAct { kind, text });
    }

    fn go(&mut self, state: DialogStateKind) {
        self.visited.push(state);
    }

    fn rest_state(&self) -> DialogStateKind {
        if self.ctx.holding.is_some() {
            DialogStateKind::AwaitDeployLocation
        } else {
            DialogStateKind::AwaitInstruction
        }
    }

    fn finish(mut self) -> Transition {
        let current = *self.visited.iter().rev().find(|s| s.is_settled()).expect("a settled state");
        if self.acts.is_empty() {
            self.act(ActKind::Inform, "ok");
        }
        Transition {
            state: DialogState { current, context: self.ctx },
            visited: self.visited,
            acts: self.acts,
            commands: self.commands,
            resolved_frame: self.resolved,
        }
    }

    fn request_fusion(&mut self, purpose: Purpose, frame: InstructionFrame) {
        let mut exclude = Vec::new();
        if purpose == Purpose::Destination {
            exclude.extend(self.ctx.holding);
        }
        let region = if purpose == Purpose::Intended { self.ctx.region.take() } else { None };
        self.ctx.pending_purpose = Some(purpose);
        self.ctx.pending_frame = Some(frame.clone());
        self.commands.push(DialogCommand::Fuse(FusionRequest { purpose, frame, region, exclude }));
        self.go(DialogStateKind::Interpreting);
    }

    fn confuse(&mut self) {
        let holding = self.ctx.holding;
        self.ctx = DialogContext { holding, ..DialogContext::default() };
        self.act(ActKind::ConfusionReset, "");
        self.go(DialogStateKind::Confused);
    }

    fn uninterpretable(&mut self, from: DialogStateKind) {
        self.ctx.repetition_count += 1;
        if self.ctx.repetition_count > self.cfg.max_repeats {
            self.confuse();
            return;
        }
        self.act(ActKind::AskRepeat, "");
        let stay = matches!(
            from,
            DialogStateKind::AwaitGesture | DialogStateKind::Clarify | DialogStateKind::AwaitDeployLocation
        );
        self.go(if stay { from } else { self.rest_state() });
    }

    fn reject(&mut self, why: &str) {
        self.act(ActKind::Reject, why);
        self.ctx.pending_frame = None;
        self.ctx.pending_purpose = None;
        let rest = self.rest_state();
        self.go(rest);
    }

    fn instruction(&mut self, frame: InstructionFrame) {
        let Some(action) = frame.action else {
            let raw = frame.raw.clone();
            return self.uninterpretable_frame(&raw);
        };
        self.ctx.repetition_count = 0;
        self.ctx.gesture_timeouts = 0;
        let frame = match resolve_anaphora(&frame, &self.ctx) {
            Ok(f) => f,
            Err(_) => {
                self.ctx.pending_frame = Some(frame);
                self.ctx.pending_purpose = Some(Purpose::Intended);
                self.act(ActKind::AskPoint, "");
                self.go(DialogStateKind::Clarify);
                return;
            }
        };
        self.resolved = Some(frame.clone());
        if let Some(color) = frame.mentioned_color().filter(|c| c.is_chromatic()) {
            self.commands.push(DialogCommand::Bias { color });
        }
        match action {
            Action::Take => {
                if let Some(held) = self.ctx.holding {
                    let what = if frame.intended_id == Some(held) { "I am already holding it." } else { "My hand is not empty." };
                    return self.reject(what);
                }
                self.act(ActKind::Inform, &format!("Looking for {}.", describe(&frame.intended, frame.anaphoric)));
                self.request_fusion(Purpose::Intended, frame);
            }
            Action::Show => {
                self.act(ActKind::Inform, &format!("Looking for {}.", describe(&frame.intended, frame.anaphoric)));
                self.request_fusion(Purpose::Intended, frame);
            }
            Action::Put => {
                let Some(held) = self.ctx.holding else {
                    return self.reject("I am not holding anything.");
                };
                if frame.intended_id.is_some_and(|id| id != held) {
                    return self.reject("I am not holding that object.");
                }
                if let Some(first) = frame.references.first() {
                    let dest = InstructionFrame {
                        intended: first.object.clone(),
                        anaphoric: false,
                        intended_id: None,
                        references: frame.references[1..].to_vec(),
                        ..frame.clone()
                    };
                    self.act(ActKind::Inform, &format!("Looking for {}.", describe(&first.object, false)));
                    self.request_fusion(Purpose::Destination, dest);
                } else if let Some(region) = self.ctx.region.take() {
                    self.place(region.target);
                } else {
                    self.ctx.pending_frame = Some(frame);
                    self.act(ActKind::AskDeploy, "");
                    self.go(DialogStateKind::AwaitDeployLocation);
                }
            }
        }
    }

    fn uninterpretable_frame(&mut self, _raw: &str) {
        let from = *self.visited.last().expect("start state");
        self.uninterpretable(from);
    }

    fn place(&mut self, position: [f64; 2]) {
        self.commands.push(DialogCommand::Manip(ManipCommand::Place { position }));
        self.act(ActKind::Inform, "Putting it there.");
        self.go(DialogStateKind::Deploying);
    }

    fn unexpected(&mut self, from: DialogStateKind) {
        self.act(ActKind::Inform, "unexpected input");
        self.go(from);
    }
}

fn describe(d: &ObjectDescription, anaphoric: bool) -> String {
    if anaphoric {
        "it".into()
    } else {
        d.describe()
    }
}

/// Deterministic next state, acts and commands for one event.
pub fn transition(state: &DialogState, event: &DialogEvent, cfg: &DialogConfig) -> Transition {
    use DialogEvent as E;
    use DialogStateKind as S;
    let mut b = Builder { cfg, ctx: state.context.clone(), visited: vec![state.current], acts: Vec::new(), commands: Vec::new(), resolved: None };
    // report states are never rested in; treat them as the waiting state they lead to
    let from = if state.current.is_settled() { state.current } else { b.rest_state() };

    match (from, event) {
        (s, E::FrameArrived(_) | E::FrameUninterpretable { .. }) if s.is_busy() => {
            b.act(ActKind::Inform, "Please wait, I am busy.");
            b.go(from);
        }
        (_, E::FrameArrived(frame)) => b.instruction(frame.clone()),
        (_, E::FrameUninterpretable { .. }) => b.uninterpretable(from),

        (S::Interpreting, E::FusionResolved { purpose, io, position }) => {
            b.ctx.retried = false;
            let frame = b.ctx.pending_frame.take();
            b.ctx.pending_purpose = None;
            match purpose {
                Purpose::Intended => {
                    b.ctx.last_intended = Some(*io);
                    let desc = frame.as_ref().map_or("it".into(), |f| describe(&f.intended, f.anaphoric));
                    if frame.as_ref().and_then(|f| f.action) == Some(Action::Show) {
                        b.act(ActKind::Inform, &format!("This is {desc}."));
                        b.go(S::ReportSuccess);
                        let rest = b.rest_state();
                        b.go(rest);
                    } else {
                        b.ctx.executing = Some(*io);
                        b.commands.push(DialogCommand::Manip(ManipCommand::Pick { target: *io, position: *position }));
                        b.act(ActKind::Inform, &format!("Taking {desc}."));
                        b.go(S::Executing);
                    }
                }
                Purpose::Destination => b.place(*position),
            }
        }
        (S::Interpreting, E::FusionAmbiguous { .. }) => {
            b.ctx.retried = false;
            b.ctx.gesture_timeouts = 0;
            b.act(ActKind::AskPoint, "");
            b.go(S::AwaitGesture);
        }
        (S::Interpreting, E::FusionNone { .. }) => {
            if b.ctx.retried {
                b.confuse();
            } else {
                b.ctx.retried = true;
                b.ctx.pending_frame = None;
                b.ctx.pending_purpose = None;
                b.act(ActKind::AskRepeat, "");
                let rest = b.rest_state();
                b.go(rest);
            }
        }

        (S::AwaitGesture | S::Clarify, E::GestureArrived(region)) => {
            match (b.ctx.pending_frame.take(), b.ctx.pending_purpose) {
                (Some(frame), Some(purpose)) => {
                    // the gesture stands in for an unresolvable pronoun
                    let frame = InstructionFrame { anaphoric: false, ..frame };
                    if frame.action == Some(Action::Put) && purpose == Purpose::Intended {
                        b.ctx.region = Some(region.clone());
                        b.instruction(frame);
                    } else {
                        b.ctx.region = Some(region.clone());
                        b.act(ActKind::Inform, "Let me look there.");
                        b.request_fusion(purpose, frame);
                    }
                }
                _ => {
                    b.ctx.region = Some(region.clone());
                    b.act(ActKind::Prompt, "");
                    b.go(S::AwaitInstruction);
                }
            }
        }
        (S::AwaitGesture | S::Clarify, E::Timeout) => {
            b.ctx.gesture_timeouts += 1;
            if b.ctx.gesture_timeouts < 2 {
                b.act(ActKind::AskPoint, "");
                b.go(from);
            } else {
                b.ctx.gesture_timeouts = 0;
                b.ctx.pending_frame = None;
                b.ctx.pending_purpose = None;
                b.act(ActKind::Prompt, "");
                let rest = b.rest_state();
                b.go(rest);
            }
        }

        (S::Executing, E::ManipSuccess { op: Operation::Pick }) => {
            b.ctx.holding = b.ctx.executing.take();
            b.act(ActKind::AskDeploy, "");
            b.go(S::AwaitDeployLocation);
        }
        (S::Executing, E::ManipFailure { op: Operation::Pick, reason, rejected }) => {
            b.ctx.executing = None;
            if *rejected {
                b.act(ActKind::Reject, &format!("I cannot do that: {reason}."));
            } else {
                b.act(ActKind::Inform, &format!("I could not take it: {reason}."));
            }
            b.go(S::ReportError);
            let rest = b.rest_state();
            b.go(rest);
        }
        (S::AwaitDeployLocation, E::GestureArrived(region)) => b.place(region.target),
        (S::AwaitDeployLocation, E::Timeout) => {
            b.act(ActKind::AskDeploy, "");
            b.go(from);
        }
        (S::Deploying, E::ManipSuccess { op: Operation::Place }) => {
            b.ctx.holding = None;
            b.act(ActKind::Inform, "Done.");
            b.go(S::ReportSuccess);
            b.go(S::AwaitInstruction);
        }
        (S::Deploying, E::ManipFailure { op: Operation::Place, reason, rejected }) => {
            let kind = if *rejected { ActKind::Reject } else { ActKind::Inform };
            b.act(kind, &format!("I could not put it there: {reason}."));
            b.go(S::ReportError);
            let rest = b.rest_state();
            b.go(rest);
        }

        (S::Idle | S::AwaitInstruction | S::Confused, E::GestureArrived(region)) => {
            b.ctx.region = Some(region.clone());
            b.act(ActKind::Inform, "I see where you are pointing.");
            b.go(if from == S::Idle { S::AwaitInstruction } else { from });
        }
        (s, E::GestureArrived(region)) if s.is_busy() => {
            b.ctx.region = Some(region.clone());
            b.act(ActKind::Inform, "Noted.");
            b.go(from);
        }

        _ => b.unexpected(from),
    }

    b.finish()
}
