use super::{Environment, StateKey};
use crate::action::ActionMask;
use crate::error::{Error, Result};

/// A single-state environment with fixed per-arm rewards. Useful as a
/// sanity check for the learners: the optimal policy is the best arm.
#[derive(Clone, Debug)]
pub struct TwoArmedBandit {
    pub rewards: [f64; 2],
}

impl Default for TwoArmedBandit {
    fn default() -> Self {
        Self { rewards: [-1.0, -2.0] }
    }
}

impl Environment for TwoArmedBandit {
    fn action_count(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        1
    }

    fn state_key(&self) -> StateKey {
        StateKey {
            queue_count: 0,
            head_task_size: 0,
            available: 0,
        }
    }

    fn features(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn action_mask(&self) -> ActionMask {
        ActionMask::all(2)
    }

    fn step_action(&mut self, index: usize) -> Result<f64> {
        self.rewards.get(index).copied().ok_or(Error::InfeasibleAction {
            index,
            reason: "bandit has two arms".into(),
        })
    }

    fn fresh(&self, _seed: u64) -> Result<Self> {
        Ok(self.clone())
    }
}
