//! The slotted-time environment.

mod bandit;
mod env;
pub mod sampling;

pub use bandit::TwoArmedBandit;
pub use env::{
    dispatch, encode_state, Assignment, Counters, EdgeEnv, InFlightTask, LearningTask, StateKey,
    StepOutcome, SystemState,
};
pub use sampling::{kth_min, sample_retransmissions, sample_straggle, subtask_serving_seconds};

use crate::action::ActionMask;
use crate::error::Result;

/// The interface learners train against. Actions are global indices into a
/// fixed table; `action_mask` says which are legal right now.
pub trait Environment {
    fn action_count(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn state_key(&self) -> StateKey;
    fn features(&self) -> Vec<f64>;
    fn action_mask(&self) -> ActionMask;
    /// Applies an action and returns its reward.
    fn step_action(&mut self, index: usize) -> Result<f64>;
    /// A fresh instance with the same parameters, for evaluation rollouts.
    fn fresh(&self, seed: u64) -> Result<Self>
    where
        Self: Sized;
}

impl Environment for EdgeEnv {
    fn action_count(&self) -> usize {
        self.action_space().len()
    }

    fn feature_dim(&self) -> usize {
        self.config().num_nodes + 2
    }

    fn state_key(&self) -> StateKey {
        self.state().key()
    }

    fn features(&self) -> Vec<f64> {
        EdgeEnv::features(self)
    }

    fn action_mask(&self) -> ActionMask {
        self.mask()
    }

    fn step_action(&mut self, index: usize) -> Result<f64> {
        Ok(self.step(index)?.reward as f64)
    }

    fn fresh(&self, seed: u64) -> Result<Self> {
        EdgeEnv::with_space(self.config().clone(), self.action_space().clone(), seed)
    }
}
