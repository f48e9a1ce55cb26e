//! Flat `key = value` configuration files.
//!
//! Keys are the field names of [`SystemConfig`] and [`TrainConfig`]
//! (the epsilon schedule is spelled `epsilon_start`, `epsilon_decay`,
//! `epsilon_floor`), tabular Q-learning settings prefixed with `qlearn_`,
//! plus `lambda_hat` and `oracle_replications`. Lists are comma separated;
//! a per-node list with a single entry is broadcast to every node. Blank
//! lines and `#` comments are ignored and unknown keys are errors.

use std::path::Path;

use crate::config::SystemConfig;
use crate::dqn::{OptimizerKind, TrainConfig};
use crate::error::{Error, Result};
use crate::oracle::POLICY_REPLICATIONS;
use crate::policy::LambdaHatMode;
use crate::qlearn::{LearningRate, QLearnConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub train: TrainConfig,
    pub qlearn: QLearnConfig,
    pub lambda_hat: LambdaHatMode,
    pub oracle_replications: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            train: TrainConfig::default(),
            qlearn: QLearnConfig::default(),
            lambda_hat: LambdaHatMode::default(),
            oracle_replications: POLICY_REPLICATIONS,
        }
    }
}

/// Splits a config line into `(key, value)`; `None` for blanks/comments.
pub(crate) fn split_line(line: &str, line_no: usize) -> Result<Option<(&str, &str)>> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got `{line}`")))?;
    Ok(Some((k.trim(), v.trim())))
}

pub(crate) fn parse_num<T: std::str::FromStr>(v: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::parse(line, format!("`{v}`: {e}")))
}

pub(crate) fn parse_list<T: std::str::FromStr>(v: &str, line: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(s, line))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut qlearn_decay: Option<f64> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if let Some((key, value)) = split_line(raw, line)? {
                if key == "qlearn_lr_decay" {
                    qlearn_decay = Some(parse_num(value, line)?);
                } else if !cfg.apply(key, value, line)? {
                    return Err(Error::UnknownKey {
                        key: key.to_string(),
                        line,
                    });
                }
            }
        }
        if let Some(d) = qlearn_decay {
            let c = match cfg.qlearn.learning_rate {
                LearningRate::Constant(c) | LearningRate::RobbinsMonro { c, .. } => c,
            };
            cfg.qlearn.learning_rate = LearningRate::RobbinsMonro { c, d };
        }
        cfg.finish()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Broadcasts single-entry per-node lists and validates everything.
    pub fn finish(&mut self) -> Result<()> {
        let n = self.system.num_nodes;
        for v in [
            &mut self.system.disconnect_probs,
            &mut self.system.straggle_rates,
            &mut self.system.per_point_seconds,
        ] {
            if v.len() == 1 && n > 1 {
                *v = vec![v[0]; n];
            }
        }
        self.system.validate()?;
        self.train.validate()?;
        self.qlearn.validate()?;
        if self.oracle_replications < crate::oracle::MIN_REPLICATIONS {
            return Err(Error::InvalidConfig("oracle_replications below 100".into()));
        }
        Ok(())
    }

    /// Applies one key; returns `false` if the key is not recognised.
    pub fn apply(&mut self, key: &str, v: &str, line: usize) -> Result<bool> {
        let s = &mut self.system;
        let t = &mut self.train;
        let q = &mut self.qlearn;
        match key {
            "num_nodes" => s.num_nodes = parse_num(v, line)?,
            "queue_capacity" => s.queue_capacity = parse_num(v, line)?,
            "arrival_prob" => s.arrival_prob = parse_num(v, line)?,
            "slot_seconds" => s.slot_seconds = parse_num(v, line)?,
            "task_sizes" => s.task_sizes = parse_list(v, line)?,
            "disconnect_probs" => s.disconnect_probs = parse_list(v, line)?,
            "straggle_rates" => s.straggle_rates = parse_list(v, line)?,
            "per_point_seconds" => s.per_point_seconds = parse_list(v, line)?,
            "f_max" => s.f_max = parse_num(v, line)?,

            "learning_rate" => t.learning_rate = parse_num(v, line)?,
            "gamma" => t.gamma = parse_num(v, line)?,
            "batch_size" => t.batch_size = parse_num(v, line)?,
            "target_period" => t.target_period = parse_num(v, line)?,
            "replay_capacity" => t.replay_capacity = parse_num(v, line)?,
            "epsilon_start" => t.epsilon.start = parse_num(v, line)?,
            "epsilon_decay" => t.epsilon.decay = parse_num(v, line)?,
            "epsilon_floor" => t.epsilon.floor = parse_num(v, line)?,
            "iterations" => t.iterations = parse_num(v, line)?,
            "hidden" => t.hidden = parse_num(v, line)?,
            "optimizer" => {
                t.optimizer = match v {
                    "adam" => OptimizerKind::adam(),
                    "sgd" => OptimizerKind::Sgd,
                    other => return Err(Error::parse(line, format!("unknown optimizer `{other}`"))),
                }
            }
            "eval_every" => t.eval_every = parse_num(v, line)?,
            "eval_slots" => t.eval_slots = parse_num(v, line)?,
            "eval_seed" => t.eval_seed = parse_num(v, line)?,

            "qlearn_learning_rate" => q.learning_rate = LearningRate::Constant(parse_num(v, line)?),
            "qlearn_gamma" => q.gamma = parse_num(v, line)?,
            "qlearn_epsilon_start" => q.epsilon.start = parse_num(v, line)?,
            "qlearn_epsilon_decay" => q.epsilon.decay = parse_num(v, line)?,
            "qlearn_epsilon_floor" => q.epsilon.floor = parse_num(v, line)?,
            "qlearn_iterations" => q.iterations = parse_num(v, line)?,

            "lambda_hat" => self.lambda_hat = v.parse()?,
            "oracle_replications" => self.oracle_replications = parse_num(v, line)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
