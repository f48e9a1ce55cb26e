//! Slotted-time simulation of MDS-coded task offloading to unreliable,
//! straggling edge nodes, together with the schedulers that drive it:
//! static baselines, tabular Q-learning, a dueling deep Q-network and a
//! brute-force Monte-Carlo oracle.
//!
//! The crate is organised bottom-up:
//!
//! - [`sim`]: samplers, serving-time model and the [`sim::EdgeEnv`] world.
//! - [`action`]: the joint (n, k, node subset) action set and its masks.
//! - [`policy`]: the [`policy::Policy`] interface and baseline schedulers.
//! - [`qlearn`]: tabular Q-learning.
//! - [`dqn`]: dueling and plain deep Q-networks with hand-written backprop.
//! - [`oracle`]: Monte-Carlo serving-time estimates and per-task argmin.
//! - [`harness`]: metrics, sweeps, config files and SVG plots.

pub mod action;
pub mod config;
pub mod dqn;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod policy;
pub mod qlearn;
pub mod rng;
pub mod sim;

pub use action::{Action, ActionKind, ActionMask, ActionSpace, NodeSet};
pub use config::SystemConfig;
pub use error::{Error, Result};
pub use policy::Policy;
pub use sim::{EdgeEnv, Environment, StateKey, SystemState};
