//! Scenario runner and trace recorder.
//!
//! A [`Session`] owns the simulated world and one actor per module. Logical
//! time advances in fixed ticks; inside a tick every cross-module effect
//! travels over the bus and is ordered by its deterministic drain.

pub mod message;
pub mod scenario;
pub mod session;
pub mod trace;

pub use message::{Message, TOPICS};
pub use scenario::{Scenario, ScriptAction, ScriptEvent};
pub use session::{Outcome, Session, SessionSnapshot, TraceEnvelope, STAGES};
pub use trace::{replay, run, Divergence, RecordedTrace, ReplayReport, Trace, TraceFooter, TraceHeader};
