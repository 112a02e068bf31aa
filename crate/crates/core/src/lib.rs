//! Deterministic discrete-event simulator for studying queue disciplines
//! (DropTail, RED, CoDel and the slack-ordered LSTFCoDel) on a small
//! dumbbell topology.

pub mod batch;
pub mod codel;
pub mod config;
pub mod engine;
pub mod error;
pub mod lstfcodel;
pub mod qdisc;
pub mod red;
pub mod report;
pub mod rng;
pub mod stats;
pub mod time;
pub mod topology;
pub mod trace;
pub mod traffic;

pub use config::{QdiscKind, Scenario};
pub use error::{Error, Result};
pub use time::SimTime;
pub use topology::{run_scenario, RunOutput};
