//! Deep Q-learning: the dueling network, a plain comparator network, the
//! replay memory and the training loop.

mod net;
mod optim;
mod replay;
mod train;

pub use net::{combine_max, combine_mean, Architecture, DuelingOutput, LayerShape, QNetwork, Sample};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    curve_csv, greedy_rollout, td_target, train_dueling, train_network, train_plain_dqn, CurvePoint, NetPolicy,
    TrainConfig, TrainOutcome,
};
