use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use super::net::{Architecture, QNetwork, Sample};
use super::optim::{Optimizer, OptimizerKind};
use super::replay::{ReplayBuffer, Transition};
use crate::action::{Action, ActionMask, ActionSpace};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::policy::{masked_argmax, Policy};
use crate::qlearn::EpsilonSchedule;
use crate::rng::{self, SimRng};
use crate::sim::{encode_state, Environment, SystemState};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Gradient steps between target-network syncs.
    pub target_period: usize,
    pub replay_capacity: usize,
    pub epsilon: EpsilonSchedule,
    pub iterations: u64,
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    /// Environment steps between greedy evaluation rollouts; 0 disables them.
    pub eval_every: u64,
    pub eval_slots: u64,
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            gamma: 0.99,
            batch_size: 16,
            target_period: 1000,
            replay_capacity: 10_000,
            epsilon: EpsilonSchedule {
                start: 1.0,
                decay: 0.9999,
                floor: 0.01,
            },
            iterations: 40_000,
            hidden: 16,
            optimizer: OptimizerKind::adam(),
            eval_every: 1000,
            eval_slots: 2000,
            eval_seed: 0x5EED,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.target_period == 0 || self.replay_capacity == 0 || self.hidden == 0 {
            return bad("batch_size, target_period, replay_capacity and hidden must be positive");
        }
        let e = self.epsilon;
        if !(e.floor >= 0.0 && e.floor <= e.start && e.start <= 1.0 && e.decay > 0.0 && e.decay <= 1.0) {
            return bad("epsilon schedule needs 0 <= floor <= start <= 1 and decay in (0, 1]");
        }
        Ok(())
    }
}

/// `r + gamma * max` of the target network's Q over feasible next actions.
pub fn td_target(reward: f64, gamma: f64, target_q_next: &[f64], next_mask: &ActionMask) -> f64 {
    let best = next_mask
        .feasible_indices()
        .map(|a| target_q_next[a])
        .fold(f64::NEG_INFINITY, f64::max);
    // The idle action is always feasible in the edge environment; a mask
    // with nothing feasible contributes no bootstrap.
    if best.is_finite() {
        reward + gamma * best
    } else {
        reward
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: u64,
    pub epsilon: f64,
    /// Mean minibatch loss since the previous point (NaN before learning starts).
    pub loss: f64,
    pub eval_reward: f64,
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("iteration,epsilon,loss,eval_reward\n");
    for p in curve {
        let _ = writeln!(out, "{},{},{},{}", p.iteration, p.epsilon, p.loss, p.eval_reward);
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: QNetwork,
    pub target: QNetwork,
    pub curve: Vec<CurvePoint>,
    pub gradient_steps: u64,
}

/// Mean reward of the feasible-argmax policy over `slots` steps.
pub fn greedy_rollout<E: Environment>(net: &QNetwork, env: &mut E, slots: u64) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..slots {
        let q = net.q_values(&env.features())?;
        let a = masked_argmax(&q, &env.action_mask())?;
        total += env.step_action(a)?;
    }
    Ok(total / slots.max(1) as f64)
}

/// Deep Q-learning with experience replay and a periodically synced target
/// network. `arch` picks the dueling or the plain network.
pub fn train_network<E: Environment>(
    env: &mut E,
    arch: Architecture,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = rng::derive(seed, rng::stream::LEARNER);
    let mut net = QNetwork::new(arch, env.feature_dim(), config.hidden, env.action_count(), &mut rng)?;
    let mut target = net.clone();
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, net.params().len());

    let eval_template = env.fresh(config.eval_seed)?;
    let evaluate = |net: &QNetwork| -> Result<f64> {
        let mut eval_env = eval_template.fresh(config.eval_seed)?;
        greedy_rollout(net, &mut eval_env, config.eval_slots)
    };
    let mut curve = Vec::new();
    if config.eval_every > 0 {
        curve.push(CurvePoint {
            iteration: 0,
            epsilon: config.epsilon.start,
            loss: f64::NAN,
            eval_reward: evaluate(&net)?,
        });
    }

    let mut epsilon = config.epsilon.start;
    let mut steps = 0u64;
    let (mut loss_sum, mut loss_n) = (0.0, 0u64);
    let mut state = env.features();
    let mut mask = env.action_mask();
    for it in 1..=config.iterations {
        let action = if rng.gen::<f64>() < epsilon {
            let pick = rng.gen_range(0..mask.count().max(1));
            mask.feasible_indices().nth(pick).ok_or(Error::EmptyMask)?
        } else {
            masked_argmax(&net.q_values(&state)?, &mask)?
        };
        let reward = env.step_action(action)?;
        let next_state = env.features();
        let next_mask = env.action_mask();
        buffer.push(Transition {
            state: std::mem::replace(&mut state, next_state.clone()),
            action,
            reward,
            next_state,
            next_mask: next_mask.clone(),
        });
        mask = next_mask;

        if buffer.len() >= config.batch_size {
            let batch = buffer.sample(config.batch_size, &mut rng);
            let targets: Vec<f64> = batch
                .iter()
                .map(|t| {
                    let q_next = target.q_values(&t.next_state)?;
                    Ok(td_target(t.reward, config.gamma, &q_next, &t.next_mask))
                })
                .collect::<Result<_>>()?;
            let samples: Vec<Sample<'_>> = batch
                .iter()
                .zip(&targets)
                .map(|(t, &y)| Sample {
                    features: &t.state,
                    action: t.action,
                    target: y,
                })
                .collect();
            let (loss, grad) = net.loss_and_gradient(&samples)?;
            opt.step(net.params_mut(), &grad);
            loss_sum += loss;
            loss_n += 1;
            steps += 1;
            if steps.is_multiple_of(config.target_period as u64) {
                target.copy_from(&net);
            }
        }
        epsilon = (epsilon * config.epsilon.decay).max(config.epsilon.floor);

        if config.eval_every > 0 && (it % config.eval_every == 0 || it == config.iterations) {
            curve.push(CurvePoint {
                iteration: it,
                epsilon,
                loss: if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN },
                eval_reward: evaluate(&net)?,
            });
            (loss_sum, loss_n) = (0.0, 0);
        }
    }
    Ok(TrainOutcome {
        net,
        target,
        curve,
        gradient_steps: steps,
    })
}

pub fn train_dueling<E: Environment>(env: &mut E, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_network(env, Architecture::Dueling, config, seed)
}

pub fn train_plain_dqn<E: Environment>(env: &mut E, config: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    train_network(env, Architecture::Plain, config, seed)
}

/// Feasible-argmax policy of a frozen network on the edge environment.
pub struct NetPolicy {
    net: QNetwork,
    config: SystemConfig,
    space: Arc<ActionSpace>,
    name: String,
}

impl NetPolicy {
    pub fn new(net: QNetwork, config: SystemConfig, space: Arc<ActionSpace>) -> Result<Self> {
        if net.input_dim() != config.num_nodes + 2 || net.action_count() != space.len() {
            return Err(Error::Dimension {
                expected: space.len(),
                actual: net.action_count(),
            });
        }
        let name = match net.architecture() {
            Architecture::Dueling => "dueling",
            Architecture::Plain => "dqn",
        }
        .to_string();
        Ok(Self { net, config, space, name })
    }

    pub fn net(&self) -> &QNetwork {
        &self.net
    }
}

impl Policy for NetPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, state: &SystemState, mask: &ActionMask, _rng: &mut SimRng) -> Action {
        let x = encode_state(state, &self.config);
        let index = self
            .net
            .q_values(&x)
            .ok()
            .and_then(|q| masked_argmax(&q, mask).ok())
            .unwrap_or(0);
        self.space.actions()[index]
    }
}
