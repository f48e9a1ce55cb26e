//! Policies by name.

use std::path::Path;
use std::sync::Arc;

use super::RunConfig;
use crate::action::ActionSpace;
use crate::dqn::{train_dueling, train_plain_dqn, Architecture, NetPolicy, QNetwork};
use crate::error::{Error, Result};
use crate::oracle::MyopicOracle;
use crate::policy::{Greedy, OneNode, Policy, RandomPolicy, StaticCode};
use crate::qlearn::{train_qlearning, QTable, QTablePolicy};
use crate::rng::{self, stream};
use crate::sim::EdgeEnv;

pub const POLICY_NAMES: &[&str] = &[
    "greedy",
    "onenode",
    "static",
    "random",
    "qlearn",
    "dueling",
    "dqn",
    "myopic-oracle",
];

pub fn is_learned(name: &str) -> bool {
    matches!(name, "qlearn" | "dueling" | "dqn")
}

/// Seed of the environment a learner trains on, kept apart from the
/// evaluation run that uses `seed` itself.
pub fn training_seed(seed: u64) -> u64 {
    seed ^ 0x7EA1_17AB_1E5E_ED00
}

fn unknown(name: &str) -> Error {
    Error::UnknownPolicy(name.to_string())
}

/// A policy that needs no training.
pub fn fixed_policy(name: &str, run: &RunConfig, space: Arc<ActionSpace>, seed: u64) -> Result<Box<dyn Policy>> {
    Ok(match name {
        "greedy" => Box::new(Greedy::new(space)),
        "onenode" => Box::new(OneNode::new(space)),
        "static" => Box::new(StaticCode::new(space, &run.system, run.lambda_hat)),
        "random" => Box::new(RandomPolicy::new(space)),
        "myopic-oracle" => Box::new(MyopicOracle::new(
            run.system.clone(),
            space,
            run.oracle_replications,
            seed,
        )),
        other => return Err(unknown(other)),
    })
}

/// Trains a learned policy on a fresh environment derived from `seed`.
pub fn train_policy(name: &str, run: &RunConfig, space: Arc<ActionSpace>, seed: u64) -> Result<Box<dyn Policy>> {
    let mut env = EdgeEnv::with_space(run.system.clone(), space.clone(), training_seed(seed))?;
    Ok(match name {
        "qlearn" => {
            let mut rng = rng::derive(seed, stream::LEARNER);
            let out = train_qlearning(&mut env, &run.qlearn, &mut rng)?;
            Box::new(QTablePolicy::new(out.table, space)?)
        }
        "dueling" => Box::new(NetPolicy::new(train_dueling(&mut env, &run.train, seed)?.net, run.system.clone(), space)?),
        "dqn" => Box::new(NetPolicy::new(train_plain_dqn(&mut env, &run.train, seed)?.net, run.system.clone(), space)?),
        other => return Err(unknown(other)),
    })
}

pub fn load_policy(name: &str, run: &RunConfig, space: Arc<ActionSpace>, checkpoint: &Path) -> Result<Box<dyn Policy>> {
    Ok(match name {
        "qlearn" => Box::new(QTablePolicy::new(QTable::load(checkpoint, space.len())?, space)?),
        "dueling" | "dqn" => {
            let net = QNetwork::load(checkpoint)?;
            let expect = if name == "dueling" { Architecture::Dueling } else { Architecture::Plain };
            if net.architecture() != expect {
                return Err(Error::InvalidConfig(format!(
                    "checkpoint holds a {} network, not `{name}`",
                    net.architecture().as_str()
                )));
            }
            Box::new(NetPolicy::new(net, run.system.clone(), space)?)
        }
        other => return Err(unknown(other)),
    })
}

/// Resolves `name` to a ready policy: fixed policies are built directly,
/// learned ones are loaded from `checkpoint` or trained from scratch.
pub fn make_policy(
    name: &str,
    run: &RunConfig,
    space: Arc<ActionSpace>,
    seed: u64,
    checkpoint: Option<&Path>,
) -> Result<Box<dyn Policy>> {
    if !POLICY_NAMES.contains(&name) {
        return Err(unknown(name));
    }
    match (is_learned(name), checkpoint) {
        (false, _) => fixed_policy(name, run, space, seed),
        (true, Some(path)) => load_policy(name, run, space, path),
        (true, None) => train_policy(name, run, space, seed),
    }
}
