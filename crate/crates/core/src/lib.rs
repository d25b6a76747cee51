//! Deterministic simulator of a multi-modal human-robot instruction loop:
//! synthetic vision with saliency-driven attention, pointing gestures, typed
//! instructions, Bayesian speech-vision fusion, a dialog manager and a grasping
//! manipulator, coupled by a publish/subscribe bus and driven by a scenario
//! harness in logical time.

pub mod attention;
pub mod bus;
pub mod config;
pub mod dialog;
pub mod error;
pub mod fusion;
pub mod gesture;
pub mod grid;
pub mod harness;
pub mod language;
pub mod manipulation;
pub mod memory;
pub mod types;
pub mod worldsim;

pub use config::Config;
pub use error::{Error, Result};
