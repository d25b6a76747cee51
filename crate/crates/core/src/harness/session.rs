//! One simulated run: the actors, their wiring on the bus and the tick loop.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::message::*;
use super::scenario::{Scenario, ScriptAction, ScriptEvent};
use crate::attention::{self, AttentionState, Fixation};
use crate::bus::{Bus, Envelope, PublisherId, SubscriberId};
use crate::config::Config;
use crate::dialog::{self, DialogCommand, DialogEvent, DialogState, DialogStateKind, Purpose};
use crate::error::{Error, Result};
use crate::fusion::{self, Ambiguity};
use crate::gesture;
use crate::grid::{Grid, GridGeometry};
use crate::language::{self, Lexicon};
use crate::manipulation::{ManipCommand, ManipState, Manipulator, Operation, StepReport};
use crate::memory::{Blob, MemorySnapshot, Viewpoint, VisualMemory};
use crate::types::Color;
use crate::worldsim::{self, Channel, FeatureMapSet, HandState, Scene, WorldEvent};

pub type TraceEnvelope = Envelope<Message>;

/// Stage markers of the pick-and-deploy sequence.
pub const STAGES: [&str; 8] = [
    "exploration",
    "instruction",
    "pointing",
    "fusion",
    "grasp",
    "ask-deploy",
    "deploy-pointing",
    "deploy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Failed,
    Timeout,
}

const PUBLISHERS: [&str; 10] =
    ["script", "world", "attention", "gesture", "memory", "language", "fusion", "dialog", "manipulation", "monitor"];

#[derive(Clone, Copy)]
struct Publishers {
    script: PublisherId,
    world: PublisherId,
    attention: PublisherId,
    gesture: PublisherId,
    memory: PublisherId,
    language: PublisherId,
    fusion: PublisherId,
    dialog: PublisherId,
    manipulation: PublisherId,
    monitor: PublisherId,
}

#[derive(Clone, Copy)]
struct Inboxes {
    attention: SubscriberId,
    gesture: SubscriberId,
    memory: SubscriberId,
    language: SubscriberId,
    fusion: SubscriberId,
    dialog: SubscriberId,
    manipulation: SubscriberId,
    monitor: SubscriberId,
}

/// Live state for the console.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSnapshot {
    pub sim_time: u64,
    pub scene: Scene,
    pub attention: Grid,
    pub fixation: Option<Fixation>,
    pub memory: MemorySnapshot,
    pub dialog: DialogStateKind,
    pub manipulation: ManipState,
    pub stages: Vec<u8>,
}

pub struct Session {
    cfg: Config,
    scenario: Scenario,
    geom: GridGeometry,
    viewpoint: Viewpoint,
    lexicon: Lexicon,
    bus: Bus<Message>,
    pubs: Publishers,
    inbox: Inboxes,
    now: u64,
    max_sim_time: u64,
    scene: Scene,
    script: VecDeque<ScriptEvent>,

    attention: AttentionState,
    attention_rng: ChaCha8Rng,
    prev_maps: Option<FeatureMapSet>,
    pending_map: Option<Grid>,
    last_attention: Grid,
    last_fixation: Option<Fixation>,

    memory: VisualMemory,
    published_snapshot: Option<MemorySnapshot>,

    language_rng: ChaCha8Rng,

    fusion_snapshot: MemorySnapshot,

    dialog: DialogState,
    waiting_since: Option<u64>,

    manipulator: Manipulator,

    stages: Vec<u8>,
    failures: u32,
    finished: Option<Outcome>,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

impl Session {
    /// Builds a session for `scenario` on top of `base` (the scenario's own
    /// config block is applied here).
    pub fn new(scenario: Scenario, base: &Config) -> Result<Session> {
        scenario.validate()?;
        let cfg = scenario.effective_config(base)?;
        let scene = worldsim::load_scene(scenario.scene.clone())?;
        let geom = scene.geometry(cfg.grid.rows, cfg.grid.cols);
        let viewpoint = scenario.viewpoint.unwrap_or_else(|| Viewpoint::front_edge(scene.table.width, scene.table.height));
        let lexicon = match &cfg.language.lexicon_path {
            Some(path) => Lexicon::from_file(std::path::Path::new(path))?,
            None => Lexicon::default(),
        };

        let mut bus = Bus::new();
        for (topic, kind) in TOPICS {
            bus.register_topic(topic, kind)?;
        }
        let ids: Vec<PublisherId> = PUBLISHERS.iter().map(|p| bus.register_publisher(p)).collect();
        let pubs = Publishers {
            script: ids[0],
            world: ids[1],
            attention: ids[2],
            gesture: ids[3],
            memory: ids[4],
            language: ids[5],
            fusion: ids[6],
            dialog: ids[7],
            manipulation: ids[8],
            monitor: ids[9],
        };
        let mut sub = |name: &str, topics: &[&str]| -> Result<SubscriberId> {
            let mut id = None;
            for t in topics {
                id = Some(bus.subscribe(t, name)?);
            }
            Ok(id.expect("at least one topic"))
        };
        let inbox = Inboxes {
            attention: sub("attention", &["bias", "manipulation-map"])?,
            gesture: sub("gesture", &["world"])?,
            memory: sub("memory", &["fixation"])?,
            language: sub("language", &["utterance"])?,
            fusion: sub("fusion", &["memory", "fusion-request"])?,
            dialog: sub("dialog", &["frame", "fusion-result", "gesture", "manip-feedback"])?,
            manipulation: sub("manipulation", &["manip-command", "control"])?,
            monitor: sub(
                "monitor",
                &["fixation", "frame", "gesture", "fusion-result", "dialog-act", "manip-command", "manip-feedback"],
            )?,
        };

        let max_sim_time = scenario.max_sim_time.unwrap_or(cfg.harness.max_sim_time_ms);
        let seed = scenario.seed;
        Ok(Session {
            attention: AttentionState::new(cfg.grid.rows, cfg.grid.cols, cfg.attention.clone()),
            attention_rng: stream(seed, 1),
            prev_maps: None,
            pending_map: None,
            last_attention: geom.zeros(),
            last_fixation: None,
            memory: VisualMemory::new(cfg.memory.clone()),
            published_snapshot: None,
            language_rng: stream(seed, 2),
            fusion_snapshot: MemorySnapshot::default(),
            dialog: DialogState::default(),
            waiting_since: None,
            manipulator: Manipulator::new(seed, cfg.manipulation.clone()),
            stages: Vec::new(),
            failures: 0,
            finished: None,
            script: scenario.script.iter().cloned().collect(),
            cfg,
            scenario,
            geom,
            viewpoint,
            lexicon,
            bus,
            pubs,
            inbox,
            now: 0,
            max_sim_time,
            scene,
        })
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn dialog_state(&self) -> &DialogState {
        &self.dialog
    }

    pub fn topics(&self) -> std::collections::BTreeMap<String, String> {
        self.bus.registry()
    }

    /// Every envelope published so far, in delivery order.
    pub fn log(&self) -> &[Arc<TraceEnvelope>] {
        self.bus.log()
    }

    pub fn stages(&self) -> &[u8] {
        &self.stages
    }

    pub fn finished(&self) -> Option<Outcome> {
        self.finished
    }

    /// Queues a user input for the next tick.
    pub fn inject(&mut self, action: ScriptAction) {
        let t = self.now;
        let at = self.script.iter().position(|e| e.t > t).unwrap_or(self.script.len());
        self.script.insert(at, ScriptEvent { t, action });
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            sim_time: self.now,
            scene: self.scene.clone(),
            attention: self.last_attention.clone(),
            fixation: self.last_fixation.clone(),
            memory: self.memory.snapshot(&self.viewpoint),
            dialog: self.dialog.current,
            manipulation: self.manipulator.state.clone(),
            stages: self.stages.clone(),
        }
    }

    /// Runs until the scenario terminates or `max_sim_time` passes.
    pub fn run_to_end(&mut self) -> Result<Outcome> {
        while self.finished.is_none() {
            if self.now > self.max_sim_time {
                self.finished = Some(Outcome::Timeout);
                break;
            }
            self.step_tick()?;
        }
        Ok(self.finished.expect("loop exits finished"))
    }

    /// One tick: scripted input, message exchange, one attention step, one
    /// manipulation step, dialog timers, message exchange. Advances the clock.
    pub fn step_tick(&mut self) -> Result<()> {
        self.inject_due()?;
        self.settle()?;
        self.attention_step()?;
        self.manipulation_step()?;
        self.dialog_timer()?;
        self.settle()?;
        if self.finished.is_none() && self.quiescent() {
            self.finished = Some(self.outcome());
        }
        self.now += self.cfg.harness.tick_ms;
        Ok(())
    }

    fn quiescent(&self) -> bool {
        self.script.is_empty()
            && !self.manipulator.busy()
            && matches!(
                self.dialog.current,
                DialogStateKind::Idle | DialogStateKind::AwaitInstruction | DialogStateKind::Confused
            )
            && self.bus.pending_len() == 0
    }

    fn outcome(&self) -> Outcome {
        if self.failures > 0 || self.dialog.current == DialogStateKind::Confused {
            Outcome::Failed
        } else {
            Outcome::Completed
        }
    }

    fn publish(&mut self, publisher: PublisherId, topic: &str, payload: Message) -> Result<()> {
        self.bus.publish(publisher, topic, payload, self.now)?;
        Ok(())
    }

    fn apply_world(&mut self, event: WorldEvent) -> Result<()> {
        self.scene = worldsim::apply_event(&self.scene, &event)?;
        self.scene.sim_time = self.now;
        self.publish(self.pubs.world, "world", Message::World(WorldMsg { event }))
    }

    fn inject_due(&mut self) -> Result<()> {
        while self.script.front().is_some_and(|e| e.t <= self.now) {
            let ev = self.script.pop_front().expect("checked");
            let p = self.pubs.script;
            match ev.action {
                ScriptAction::Utterance { text } => {
                    self.publish(p, "utterance", Message::Utterance(UtteranceMsg { text }))?;
                }
                ScriptAction::Gesture { hand: Some(hand) } => {
                    let event = if self.scene.hand.is_some() {
                        WorldEvent::HandMove { hand }
                    } else {
                        WorldEvent::HandAppear { hand }
                    };
                    self.apply_world(event)?;
                }
                ScriptAction::Gesture { hand: None } | ScriptAction::HandVanish => {
                    self.apply_world(WorldEvent::HandVanish)?;
                }
                ScriptAction::Point { x, y } => {
                    let g = &self.cfg.gesture;
                    let hand = HandState::pointing_at((x, y), g.synth_reach_mm, g.synth_height_mm);
                    let event = if self.scene.hand.is_some() {
                        WorldEvent::HandMove { hand }
                    } else {
                        WorldEvent::HandAppear { hand }
                    };
                    self.apply_world(event)?;
                }
                ScriptAction::SlipInjection => {
                    self.publish(p, "control", Message::Control(ControlMsg { cmd: "inject-slip".into() }))?;
                }
                ScriptAction::Control { cmd } => {
                    self.publish(p, "control", Message::Control(ControlMsg { cmd }))?;
                }
            }
        }
        Ok(())
    }

    /// Delivers and handles messages until nothing is left at the current time.
    fn settle(&mut self) -> Result<()> {
        for _ in 0..10_000 {
            self.bus.drain(self.now);
            self.attention_inbox()?;
            self.gesture_inbox()?;
            self.memory_inbox()?;
            self.language_inbox()?;
            self.fusion_inbox()?;
            self.dialog_inbox()?;
            self.manipulation_inbox()?;
            self.monitor_inbox()?;
            if self.bus.pending_len() == 0 {
                return Ok(());
            }
        }
        Err(Error::Scenario("message exchange did not settle".into()))
    }

    // attention

    fn attention_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.attention) {
            match &env.payload {
                Message::Bias(b) => {
                    if b.color.is_chromatic() {
                        self.attention = attention::bias_color(&self.attention, b.color, self.now)?;
                    }
                }
                Message::ManipulationMap(m) => self.pending_map = Some(m.map.clone()),
                _ => {}
            }
        }
        Ok(())
    }

    fn attention_step(&mut self) -> Result<()> {
        let dt = self.cfg.harness.tick_ms as f64;
        let maps = worldsim::render(&self.scene, &self.geom, self.prev_maps.as_ref());
        let moving = attention::moving_skin(maps.get(Channel::MotionDifference), maps.get(Channel::Skin))?;
        self.attention = attention::decay(&self.attention, dt);
        // the pointing region gates a single selection
        let gate = self.pending_map.take();
        let grid = attention::fuse(&maps, &moving, &self.attention, gate.as_ref())?;
        let fixation = attention::next_fixation(&grid, &self.geom, self.cfg.attention.theta_fix, self.now);
        self.prev_maps = Some(maps);
        self.last_attention = grid;
        let Some(fixation) = fixation else {
            self.attention = attention::recover_fadeout(&self.attention, dt);
            return Ok(());
        };
        self.attention = attention::apply_fadeout(&self.attention, &fixation, dt);
        let blob = self.blob_at(&fixation);
        self.last_fixation = Some(fixation.clone());
        self.publish(self.pubs.attention, "fixation", Message::Fixation(FixationMsg { fixation, blob }))
    }

    fn blob_at(&mut self, fixation: &Fixation) -> Option<Blob> {
        let obj = self.scene.object_at_cell(&self.geom, fixation.cell)?;
        let mut blob = Blob { color: obj.color, kind: obj.kind };
        let p = self.cfg.memory.blob_mislabel_prob.clamp(0.0, 1.0);
        if p > 0.0 && self.attention_rng.gen_bool(p) {
            let others: Vec<Color> = Color::ALL.iter().copied().filter(|c| *c != blob.color).collect();
            blob.color = others[self.attention_rng.gen_range(0..others.len())];
        }
        Some(blob)
    }

    // gesture

    fn gesture_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.gesture) {
            let Message::World(w) = &env.payload else { continue };
            if !matches!(w.event, WorldEvent::HandAppear { .. } | WorldEvent::HandMove { .. }) {
                continue;
            }
            let Some((origin, direction)) = gesture::detect_pointing(&self.scene) else { continue };
            let Ok(pointing) = gesture::project_ray(origin, direction, &self.geom, self.cfg.gesture.region_radius_mm) else {
                continue;
            };
            let map = gesture::region_to_map(&pointing, &self.geom);
            let (target, radius) = (pointing.target, pointing.region_radius);
            self.publish(self.pubs.gesture, "gesture", Message::Gesture(GestureMsg { pointing }))?;
            self.publish(
                self.pubs.gesture,
                "manipulation-map",
                Message::ManipulationMap(ManipulationMapMsg { target, radius, map }),
            )?;
        }
        Ok(())
    }

    // memory

    fn memory_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.memory) {
            let Message::Fixation(f) = &env.payload else { continue };
            self.memory = self.memory.integrate_fixation(&f.fixation, f.blob).evict(self.now);
            let snapshot = self.memory.snapshot(&self.viewpoint);
            if self.published_snapshot.as_ref() != Some(&snapshot) {
                self.published_snapshot = Some(snapshot.clone());
                self.publish(self.pubs.memory, "memory", Message::Memory(MemorySnapshotMsg { snapshot }))?;
            }
        }
        Ok(())
    }

    // language

    fn language_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.language) {
            let Message::Utterance(u) = &env.payload else { continue };
            let rate = self.cfg.language.error_rate;
            let heard = if rate > 0.0 {
                language::corrupt_with(&u.text, rate, &mut self.language_rng, &self.lexicon)
            } else {
                u.text.clone()
            };
            let (frame, error) = match language::understand(&heard, &self.lexicon) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let msg = FrameMsg { raw: u.text.clone(), heard, frame, error };
            self.publish(self.pubs.language, "frame", Message::Frame(msg))?;
        }
        Ok(())
    }

    // fusion

    fn fusion_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.fusion) {
            match &env.payload {
                Message::Memory(m) => self.fusion_snapshot = m.snapshot.clone(),
                Message::FusionRequest(req) => {
                    let mut snap = self.fusion_snapshot.clone();
                    snap.hypotheses.retain(|h| !req.exclude.contains(&h.id));
                    snap.relations.pairs.retain(|(a, b, _)| !req.exclude.contains(a) && !req.exclude.contains(b));
                    let msg = self.fuse(&snap, req);
                    self.publish(self.pubs.fusion, "fusion-result", Message::FusionResult(msg))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn fuse(&self, snap: &MemorySnapshot, req: &dialog::FusionRequest) -> FusionResultMsg {
        let empty = |error: String| FusionResultMsg {
            purpose: req.purpose,
            status: Ambiguity::None,
            io: None,
            ro: Vec::new(),
            position: None,
            posterior: None,
            marginals: Vec::new(),
            error: Some(error),
        };
        if let Some(id) = req.frame.intended_id {
            // already bound by anaphora
            return match snap.get(id) {
                Some(h) => FusionResultMsg {
                    purpose: req.purpose,
                    status: Ambiguity::Resolved,
                    io: Some(id),
                    ro: Vec::new(),
                    position: Some(h.centroid),
                    posterior: Some(1.0),
                    marginals: vec![(id, 1.0)],
                    error: None,
                },
                None => empty(Error::UnresolvableReference.to_string()),
            };
        }
        let result =
            fusion::build(snap, &req.frame, &self.cfg.fusion.cpts, req.region.as_ref()).and_then(|net| fusion::map_inference(&net));
        let status = fusion::ambiguity_check(&result, self.cfg.fusion.margin);
        match result {
            Ok(out) => FusionResultMsg {
                purpose: req.purpose,
                status,
                io: Some(out.io),
                position: snap.get(out.io).map(|h| h.centroid),
                ro: out.ro,
                posterior: Some(out.posterior),
                marginals: out.marginals,
                error: None,
            },
            Err(e) => empty(e.to_string()),
        }
    }

    // dialog

    fn dialog_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.dialog) {
            let event = match &env.payload {
                Message::Frame(f) => match &f.frame {
                    Some(frame) => DialogEvent::FrameArrived(frame.clone()),
                    None => DialogEvent::FrameUninterpretable { raw: f.heard.clone() },
                },
                Message::FusionResult(r) => match (r.status, r.io, r.position) {
                    (Ambiguity::Resolved, Some(io), Some(position)) => {
                        DialogEvent::FusionResolved { purpose: r.purpose, io, position }
                    }
                    (Ambiguity::Ambiguous, _, _) => DialogEvent::FusionAmbiguous { purpose: r.purpose },
                    _ => DialogEvent::FusionNone { purpose: r.purpose },
                },
                Message::Gesture(g) => DialogEvent::GestureArrived(g.pointing.clone()),
                Message::ManipFeedback(fb) => match fb.status {
                    ManipStatus::Progress => continue,
                    ManipStatus::Succeeded => DialogEvent::ManipSuccess { op: fb.op },
                    ManipStatus::Failed | ManipStatus::Rejected => DialogEvent::ManipFailure {
                        op: fb.op,
                        reason: fb.reason.clone().unwrap_or_default(),
                        rejected: fb.status == ManipStatus::Rejected,
                    },
                },
                _ => continue,
            };
            self.dialog_event(&event)?;
        }
        Ok(())
    }

    fn dialog_event(&mut self, event: &DialogEvent) -> Result<()> {
        let t = dialog::transition(&self.dialog, event, &self.cfg.dialog);
        self.dialog = t.state;
        let p = self.pubs.dialog;
        if let Some(frame) = t.resolved_frame {
            self.publish(p, "resolved-frame", Message::ResolvedFrame(ResolvedFrameMsg { frame }))?;
        }
        for cmd in t.commands {
            match cmd {
                DialogCommand::Bias { color } => self.publish(p, "bias", Message::Bias(BiasMsg { color }))?,
                DialogCommand::Fuse(req) => self.publish(p, "fusion-request", Message::FusionRequest(req))?,
                DialogCommand::Manip(command) => {
                    self.publish(p, "manip-command", Message::ManipCommand(ManipCommandMsg { command }))?
                }
            }
        }
        let state = self.dialog.current;
        for act in t.acts {
            self.publish(p, "dialog-act", Message::DialogAct(DialogActMsg { act, state }))?;
        }
        self.waiting_since = matches!(
            state,
            DialogStateKind::AwaitGesture | DialogStateKind::Clarify | DialogStateKind::AwaitDeployLocation
        )
        .then_some(self.now);
        Ok(())
    }

    fn dialog_timer(&mut self) -> Result<()> {
        let timeout = self.cfg.dialog.gesture_timeout_ms;
        if self.waiting_since.is_some_and(|since| self.now >= since + timeout) {
            self.dialog_event(&DialogEvent::Timeout)?;
        }
        Ok(())
    }

    // manipulation

    fn manipulation_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.manipulation) {
            match &env.payload {
                Message::ManipCommand(c) => {
                    let op = c.command.operation();
                    if let Err(e) = self.manipulator.start(c.command.clone(), &self.scene) {
                        let reason = match e {
                            Error::Infeasible(r) => r,
                            other => other.to_string(),
                        };
                        self.failures += 1;
                        let msg = self.feedback_msg(op, ManipStatus::Rejected, None, None, Some(reason), None);
                        self.publish(self.pubs.manipulation, "manip-feedback", Message::ManipFeedback(msg))?;
                    }
                }
                Message::Control(c) if c.cmd == "inject-slip" => self.manipulator.sim.arm_slip(),
                // other direct commands have no simulated effect
                _ => {}
            }
        }
        Ok(())
    }

    fn feedback_msg(
        &self,
        op: Operation,
        status: ManipStatus,
        feedback: Option<crate::manipulation::Feedback>,
        actuator: Option<crate::manipulation::Actuator>,
        reason: Option<String>,
        position: Option<[f64; 2]>,
    ) -> ManipFeedbackMsg {
        let s = &self.manipulator.state;
        ManipFeedbackMsg { op, status, attempts: s.attempt, arm: s.arm, hand: s.hand, feedback, actuator, reason, position }
    }

    fn manipulation_step(&mut self) -> Result<()> {
        let Some(command) = self.manipulator.command().cloned() else {
            return Ok(());
        };
        let op = command.operation();
        let p = self.pubs.manipulation;
        let step = match self.manipulator.step(&self.scene) {
            Ok(step) => step,
            Err(e) => {
                self.manipulator.abort();
                self.failures += 1;
                let msg = self.feedback_msg(op, ManipStatus::Failed, None, None, Some(e.to_string()), None);
                return self.publish(p, "manip-feedback", Message::ManipFeedback(msg));
            }
        };
        let mut position = None;
        for event in step.events {
            match &event {
                WorldEvent::ObjectPickup { id } => position = self.scene.object(id).map(|o| o.position),
                WorldEvent::ObjectPlace { position: at, .. } => position = Some(*at),
                _ => {}
            }
            self.apply_world(event)?;
        }
        let (status, reason) = match step.report {
            StepReport::Progress => (ManipStatus::Progress, None),
            StepReport::Succeeded { .. } => (ManipStatus::Succeeded, None),
            StepReport::Failed { reason, .. } => {
                self.failures += 1;
                (ManipStatus::Failed, Some(reason))
            }
        };
        let mut msg = self.feedback_msg(op, status, Some(step.trace.feedback), Some(step.trace.actuator), reason, position);
        msg.attempts = step.trace.attempt;
        if let ManipCommand::Pick { .. } = command {
            if status == ManipStatus::Succeeded && msg.position.is_none() {
                msg.position = self.scene.held_object().map(|o| o.position);
            }
        }
        self.publish(p, "manip-feedback", Message::ManipFeedback(msg))
    }

    // monitor

    fn monitor_inbox(&mut self) -> Result<()> {
        for env in self.bus.recv_all(self.inbox.monitor) {
            let stage = match &env.payload {
                Message::Fixation(_) => 1,
                Message::Frame(f) if f.frame.as_ref().is_some_and(|fr| fr.is_well_formed()) => 2,
                Message::Gesture(_) => 3,
                Message::FusionResult(r) if r.purpose == Purpose::Intended && r.status == Ambiguity::Resolved => 4,
                Message::ManipFeedback(fb) if fb.status == ManipStatus::Succeeded && fb.op == Operation::Pick => 5,
                Message::DialogAct(a) if a.act.kind == dialog::ActKind::AskDeploy => 6,
                Message::ManipCommand(c) if c.command.operation() == Operation::Place => 7,
                Message::ManipFeedback(fb) if fb.status == ManipStatus::Succeeded && fb.op == Operation::Place => 8,
                _ => continue,
            };
            if !self.stages.contains(&stage) {
                self.stages.push(stage);
                let name = STAGES[stage as usize - 1].to_string();
                self.publish(self.pubs.monitor, "stage", Message::Stage(StageMsg { stage, name }))?;
            }
        }
        Ok(())
    }
}
