//! Arm/hand controller: a finite state automaton driven by simulated wrist
//! camera and fingertip feedback, with grasp prototypes and one retry.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ManipulationConfig;
use crate::error::{Error, Result};
use crate::memory::HypothesisId;
use crate::types::Kind;
use crate::worldsim::{Scene, WorldEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmMode {
    Idle,
    Approach,
    Refine,
    Closer,
    ReAlign,
    Lift,
    Transport,
    Lower,
    Retract,
}

impl ArmMode {
    pub const ALL: [ArmMode; 9] = [
        ArmMode::Idle,
        ArmMode::Approach,
        ArmMode::Refine,
        ArmMode::Closer,
        ArmMode::ReAlign,
        ArmMode::Lift,
        ArmMode::Transport,
        ArmMode::Lower,
        ArmMode::Retract,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HandState {
    Open,
    PreShape,
    Grasp,
    Hold,
    Release,
}

impl HandState {
    pub const ALL: [HandState; 5] =
        [HandState::Open, HandState::PreShape, HandState::Grasp, HandState::Hold, HandState::Release];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prototype {
    TwoFinger,
    ThreeFinger,
}

impl Prototype {
    /// Fingers that must make contact for the force criterion.
    pub fn engaged(self) -> usize {
        match self {
            Prototype::TwoFinger => 2,
            Prototype::ThreeFinger => 3,
        }
    }
}

pub fn choose_prototype(kind: Option<Kind>) -> Prototype {
    match kind {
        Some(Kind::Cube | Kind::Block) => Prototype::TwoFinger,
        Some(Kind::Bar | Kind::Bolt) | None => Prototype::ThreeFinger,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Pick,
    Place,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum ManipCommand {
    Pick { target: HypothesisId, position: [f64; 2] },
    Place { position: [f64; 2] },
}

impl ManipCommand {
    pub fn operation(&self) -> Operation {
        match self {
            ManipCommand::Pick { .. } => Operation::Pick,
            ManipCommand::Place { .. } => Operation::Place,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Feedback {
    WristOffset { dx: f64, dy: f64 },
    ObjectKind { kind: Option<Kind> },
    FingertipForces { forces: [f64; 3] },
    Slip,
    Placed,
}

impl Feedback {
    pub fn offset(d: f64) -> Feedback {
        Feedback::WristOffset { dx: d, dy: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actuator {
    None,
    MoveToward,
    Recenter,
    PreShape,
    MoveCloser,
    AlignAxis,
    CloseFingers,
    Reopen,
    Lift,
    MoveToPlace,
    Lower,
    OpenHand,
    Retract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipState {
    pub arm: ArmMode,
    pub hand: HandState,
    pub prototype: Option<Prototype>,
    pub attempt: u32,
    /// Feedback steps spent in Grasp during the current attempt.
    pub grasp_steps: u32,
}

impl Default for ManipState {
    fn default() -> Self {
        ManipState { arm: ArmMode::Idle, hand: HandState::Open, prototype: None, attempt: 0, grasp_steps: 0 }
    }
}

impl ManipState {
    /// Start of a pick: first attempt, open hand, approaching.
    pub fn picking() -> Self {
        ManipState { arm: ArmMode::Approach, hand: HandState::Open, prototype: None, attempt: 1, grasp_steps: 0 }
    }

    /// Start of a place: object held, transporting.
    pub fn placing(prototype: Option<Prototype>) -> Self {
        ManipState { arm: ArmMode::Transport, hand: HandState::Hold, prototype, attempt: 1, grasp_steps: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum StepReport {
    Progress,
    Succeeded { attempts: u32 },
    Failed { reason: String, attempts: u32 },
}

fn magnitude(dx: f64, dy: f64) -> f64 {
    dx.hypot(dy)
}

fn impossible(state: &ManipState, fb: &Feedback) -> Error {
    Error::ManipFault(format!("{fb:?} in {:?}/{:?}", state.arm, state.hand))
}

/// One automaton transition.
pub fn fsm_step(
    state: &ManipState,
    feedback: &Feedback,
    cfg: &ManipulationConfig,
) -> Result<(ManipState, Actuator, StepReport)> {
    use ArmMode as A;
    use HandState as H;
    let mut next = state.clone();
    let progress = StepReport::Progress;
    let out = match (state.arm, state.hand, feedback) {
        (A::Approach, H::Open, Feedback::WristOffset { dx, dy }) => {
            if magnitude(*dx, *dy) < cfg.delta_ref_mm {
                next.arm = A::Refine;
                (Actuator::Recenter, progress)
            } else {
                (Actuator::MoveToward, progress)
            }
        }
        (A::Refine, H::Open, Feedback::WristOffset { .. }) => (Actuator::Recenter, progress),
        (A::Refine, H::Open, Feedback::ObjectKind { kind }) => {
            next.prototype = Some(choose_prototype(*kind));
            next.hand = H::PreShape;
            next.arm = A::Closer;
            (Actuator::PreShape, progress)
        }
        (A::Closer, H::PreShape, Feedback::WristOffset { dx, dy }) => {
            if magnitude(*dx, *dy) < cfg.delta_align_mm {
                next.arm = A::ReAlign;
                (Actuator::AlignAxis, progress)
            } else {
                (Actuator::MoveCloser, progress)
            }
        }
        (A::ReAlign, H::PreShape, Feedback::WristOffset { dx, dy }) => {
            if magnitude(*dx, *dy) < cfg.delta_align_mm {
                next.hand = H::Grasp;
                next.grasp_steps = 0;
                (Actuator::CloseFingers, progress)
            } else {
                (Actuator::AlignAxis, progress)
            }
        }
        (A::ReAlign, H::Grasp, Feedback::FingertipForces { forces }) => {
            if forces.iter().any(|f| *f < 0.0) {
                return Err(impossible(state, feedback));
            }
            let engaged = state.prototype.unwrap_or(Prototype::ThreeFinger).engaged();
            let ok = forces[..engaged].iter().all(|f| (cfg.force_min_n..=cfg.force_max_n).contains(f));
            if ok {
                next.hand = H::Hold;
                next.arm = A::Lift;
                (Actuator::Lift, StepReport::Succeeded { attempts: state.attempt })
            } else {
                next.grasp_steps += 1;
                if next.grasp_steps >= cfg.grasp_timeout_steps {
                    return Ok(retry(state, "grasp timeout", cfg));
                }
                (Actuator::CloseFingers, progress)
            }
        }
        (A::ReAlign, H::Grasp, Feedback::Slip) => return Ok(retry(state, "slip", cfg)),
        (A::Transport, H::Hold, Feedback::WristOffset { dx, dy }) => {
            if magnitude(*dx, *dy) < cfg.delta_ref_mm {
                next.arm = A::Lower;
                (Actuator::Lower, progress)
            } else {
                (Actuator::MoveToPlace, progress)
            }
        }
        (A::Lower, H::Hold, Feedback::WristOffset { .. }) => (Actuator::Lower, progress),
        (A::Lower, H::Hold, Feedback::Placed) => {
            next.hand = H::Release;
            next.arm = A::Retract;
            (Actuator::OpenHand, StepReport::Succeeded { attempts: state.attempt })
        }
        _ => return Err(impossible(state, feedback)),
    };
    Ok((next, out.0, out.1))
}

fn retry(state: &ManipState, reason: &str, cfg: &ManipulationConfig) -> (ManipState, Actuator, StepReport) {
    if state.attempt >= cfg.max_attempts {
        let failed = ManipState { arm: ArmMode::Idle, hand: HandState::Open, prototype: None, attempt: state.attempt, grasp_steps: 0 };
        return (failed, Actuator::Reopen, StepReport::Failed { reason: reason.into(), attempts: state.attempt });
    }
    let again = ManipState {
        arm: ArmMode::Approach,
        hand: HandState::Open,
        prototype: None,
        attempt: state.attempt + 1,
        grasp_steps: 0,
    };
    (again, Actuator::Reopen, StepReport::Progress)
}

/// Stand-in for the wrist camera and fingertip sensors.
#[derive(Debug, Clone)]
pub struct FeedbackSimulator {
    rng: ChaCha8Rng,
    cfg: ManipulationConfig,
    offset: f64,
    phase: Option<(ArmMode, HandState, u32)>,
    force_step: u32,
    step: u32,
    slip_steps: BTreeSet<u32>,
    armed_slips: u32,
}

impl FeedbackSimulator {
    pub fn new(seed: u64, cfg: ManipulationConfig) -> Self {
        FeedbackSimulator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            offset: cfg.initial_offset_mm,
            cfg,
            phase: None,
            force_step: 0,
            step: 0,
            slip_steps: BTreeSet::new(),
            armed_slips: 0,
        }
    }

    /// Slip exactly at feedback step `k` (0-based, counted across the command).
    pub fn schedule_slip_at(&mut self, k: u32) {
        self.slip_steps.insert(k);
    }

    /// Slip on the next grasp, whenever it happens.
    pub fn arm_slip(&mut self) {
        self.armed_slips += 1;
    }

    pub fn armed_slips(&self) -> u32 {
        self.armed_slips
    }

    /// Restarts the step counter for a new command.
    pub fn reset(&mut self) {
        self.step = 0;
        self.phase = None;
    }

    pub fn simulate_feedback(&mut self, scene: &Scene, state: &ManipState, target: Option<&str>) -> Result<Feedback> {
        if let Some(id) = target {
            if scene.object(id).is_none() {
                return Err(Error::ManipFault(format!("target `{id}` vanished")));
            }
        }
        let step = self.step;
        self.step += 1;
        // new phase: restart the geometric approach series
        let phase_key = (state.arm, state.hand, state.attempt);
        if self.phase != Some(phase_key) {
            match (state.arm, state.hand) {
                (ArmMode::Approach, _) | (ArmMode::Transport, _) => self.offset = self.cfg.initial_offset_mm,
                (ArmMode::Closer, _) => self.offset = self.cfg.grasp_offset_mm,
                (ArmMode::ReAlign, HandState::Grasp) => self.force_step = 0,
                _ => {}
            }
            self.phase = Some(phase_key);
        }
        if self.slip_steps.contains(&step) && state.hand == HandState::Grasp {
            return Ok(Feedback::Slip);
        }
        let fb = match (state.arm, state.hand) {
            (ArmMode::Approach | ArmMode::Closer | ArmMode::ReAlign | ArmMode::Transport, h) if h != HandState::Grasp => {
                let d = self.offset;
                self.offset *= self.cfg.approach_ratio;
                Feedback::offset(d)
            }
            (ArmMode::Refine, _) => {
                let truth = target.and_then(|id| scene.object(id)).map(|o| o.kind);
                let kind = match truth {
                    Some(k) if self.rng.gen_bool(self.cfg.kind_mislabel_prob.clamp(0.0, 1.0)) => {
                        let others: Vec<Kind> = Kind::ALL.iter().copied().filter(|x| *x != k).collect();
                        Some(others[self.rng.gen_range(0..others.len())])
                    }
                    other => other,
                };
                Feedback::ObjectKind { kind }
            }
            (ArmMode::ReAlign, HandState::Grasp) => {
                if self.armed_slips > 0 {
                    self.armed_slips -= 1;
                    return Ok(Feedback::Slip);
                }
                self.force_step = (self.force_step + 1).min(self.cfg.force_ramp_steps);
                let f = self.cfg.force_target_n * self.force_step as f64 / self.cfg.force_ramp_steps as f64;
                Feedback::FingertipForces { forces: [f, f, f] }
            }
            (ArmMode::Lower, _) => Feedback::Placed,
            (arm, hand) => return Err(Error::ManipFault(format!("no feedback defined in {arm:?}/{hand:?}"))),
        };
        Ok(fb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub feedback: Feedback,
    pub arm: ArmMode,
    pub hand: HandState,
    pub attempt: u32,
    pub actuator: Actuator,
}

/// Outcome of one `step` of the manipulator.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub trace: TraceStep,
    pub report: StepReport,
    pub events: Vec<WorldEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum ExecResult {
    Success { attempts: u32 },
    Failure { reason: String },
}

/// The manipulation actor's state: automaton, sensors and what is being held.
#[derive(Debug, Clone)]
pub struct Manipulator {
    pub state: ManipState,
    pub sim: FeedbackSimulator,
    cfg: ManipulationConfig,
    command: Option<ManipCommand>,
    target_object: Option<String>,
    holding: Option<String>,
    steps: u32,
}

impl Manipulator {
    pub fn new(seed: u64, cfg: ManipulationConfig) -> Self {
        Manipulator {
            state: ManipState::default(),
            sim: FeedbackSimulator::new(seed, cfg.clone()),
            cfg,
            command: None,
            target_object: None,
            holding: None,
            steps: 0,
        }
    }

    pub fn busy(&self) -> bool {
        self.command.is_some()
    }

    pub fn holding(&self) -> Option<&str> {
        self.holding.as_deref()
    }

    pub fn command(&self) -> Option<&ManipCommand> {
        self.command.as_ref()
    }

    /// Checks preconditions and starts the command.
    pub fn start(&mut self, command: ManipCommand, scene: &Scene) -> Result<()> {
        if self.busy() {
            return Err(Error::Infeasible("manipulator busy".into()));
        }
        match &command {
            ManipCommand::Pick { position, .. } => {
                if self.holding.is_some() {
                    return Err(Error::Infeasible("hand is not empty".into()));
                }
                let nearest = scene
                    .objects
                    .iter()
                    .map(|o| (o, (o.position[0] - position[0]).hypot(o.position[1] - position[1])))
                    .filter(|(_, d)| *d <= self.cfg.match_radius_mm)
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                let Some((obj, _)) = nearest else {
                    return Err(Error::Infeasible("no object at target".into()));
                };
                if obj.held {
                    return Err(Error::Infeasible(format!("`{}` is already held", obj.id)));
                }
                self.target_object = Some(obj.id.clone());
                self.state = ManipState::picking();
            }
            ManipCommand::Place { position } => {
                if self.holding.is_none() || self.state.hand != HandState::Hold {
                    return Err(Error::Infeasible("nothing to place".into()));
                }
                if !(0.0..=scene.table.width).contains(&position[0]) || !(0.0..=scene.table.height).contains(&position[1]) {
                    return Err(Error::Infeasible("place position off table".into()));
                }
                self.target_object = None;
                self.state = ManipState::placing(self.state.prototype);
            }
        }
        self.sim.reset();
        self.steps = 0;
        self.command = Some(command);
        Ok(())
    }

    /// One feedback/transition cycle of the running command.
    pub fn step(&mut self, scene: &Scene) -> Result<StepResult> {
        let Some(command) = self.command.clone() else {
            return Err(Error::ManipFault("no active command".into()));
        };
        self.steps += 1;
        let feedback = self.sim.simulate_feedback(scene, &self.state, self.target_object.as_deref())?;
        let (next, actuator, mut report) = fsm_step(&self.state, &feedback, &self.cfg)?;
        self.state = next;
        if self.steps >= self.cfg.max_steps && report == StepReport::Progress {
            report = StepReport::Failed { reason: "step limit".into(), attempts: self.state.attempt };
        }
        let mut events = Vec::new();
        match (&report, &command) {
            (StepReport::Succeeded { .. }, ManipCommand::Pick { .. }) => {
                let id = self.target_object.take().expect("pick has a target");
                events.push(WorldEvent::ObjectPickup { id: id.clone() });
                self.holding = Some(id);
                self.command = None;
            }
            (StepReport::Succeeded { .. }, ManipCommand::Place { position }) => {
                let id = self.holding.take().expect("place holds an object");
                events.push(WorldEvent::ObjectPlace { id, position: *position });
                self.command = None;
            }
            (StepReport::Failed { .. }, _) => {
                self.command = None;
                self.target_object = None;
            }
            _ => {}
        }
        let trace = TraceStep {
            feedback,
            arm: self.state.arm,
            hand: self.state.hand,
            attempt: self.state.attempt,
            actuator,
        };
        Ok(StepResult { trace, report, events })
    }

    /// Drops the running command; a held object stays held.
    pub fn abort(&mut self) {
        self.command = None;
        self.target_object = None;
        let holding = self.holding.is_some();
        self.state = ManipState {
            arm: ArmMode::Idle,
            hand: if holding { HandState::Hold } else { HandState::Open },
            prototype: if holding { self.state.prototype } else { None },
            attempt: self.state.attempt,
            grasp_steps: 0,
        };
    }

    /// Runs a command to completion, applying the resulting scene events.
    pub fn execute(&mut self, command: ManipCommand, scene: &mut Scene) -> Result<(ExecResult, Vec<TraceStep>)> {
        self.start(command, scene)?;
        let mut trace = Vec::new();
        loop {
            let r = self.step(scene)?;
            for ev in &r.events {
                *scene = crate::worldsim::apply_event(scene, ev)?;
            }
            trace.push(r.trace);
            match r.report {
                StepReport::Progress => {}
                StepReport::Succeeded { attempts } => return Ok((ExecResult::Success { attempts }, trace)),
                StepReport::Failed { reason, .. } => return Ok((ExecResult::Failure { reason }, trace)),
            }
        }
    }
}
