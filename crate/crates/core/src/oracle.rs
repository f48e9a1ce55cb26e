//! Monte-Carlo serving-time oracle for a single task.
//!
//! For one task of known size and a set of free nodes, every `(n, k,
//! subset)` choice is scored by the expected time until its k-th chunk
//! returns, estimated from common random numbers: each replication draws
//! one retransmission count and one straggling delay per node and reuses
//! them for every candidate action. Times are in seconds and are not
//! quantised to slots.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex};

use crate::action::{subtask_size, Action, ActionMask, ActionSpace, NodeSet};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::rng::{self, SimRng};
use crate::sim::{kth_min, sample_retransmissions, sample_straggle, subtask_serving_seconds, SystemState};

pub const MIN_REPLICATIONS: usize = 100;
pub const POLICY_REPLICATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedServeEstimate {
    pub action: Action,
    pub mean_seconds: f64,
    /// Normal-approximation 95% confidence half-width.
    pub half_width_95: f64,
    pub replications: usize,
}

#[derive(Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn half_width(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.n - 1) as f64;
        1.96 * (var / self.n as f64).sqrt()
    }
}

fn check_action(config: &SystemConfig, action: &Action) -> Result<()> {
    let bad = |m: String| {
        Err(Error::InfeasibleAction {
            index: action.index,
            reason: m,
        })
    };
    if action.is_idle() {
        return bad("idle action has no serving time".into());
    }
    if action.subset.len() != action.n || action.k == 0 || action.k > action.n {
        return bad(format!("malformed code action {action}"));
    }
    if action.subset.iter().any(|j| j >= config.num_nodes) {
        return bad(format!("subset of {action} names a missing node"));
    }
    Ok(())
}

/// Scores every action on shared per-node draws.
pub fn estimate_many(
    config: &SystemConfig,
    task_size: u32,
    actions: &[Action],
    replications: usize,
    rng: &mut SimRng,
) -> Result<Vec<ExpectedServeEstimate>> {
    config.validate()?;
    if replications < MIN_REPLICATIONS {
        return Err(Error::Domain(format!(
            "need at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    if task_size == 0 {
        return Err(Error::Domain("task size must be positive".into()));
    }
    for a in actions {
        check_action(config, a)?;
    }
    let n = config.num_nodes;
    let mut stats = vec![Welford::default(); actions.len()];
    let mut comm = vec![0.0; n];
    let mut straggle = vec![0.0; n];
    let mut times = Vec::with_capacity(n);
    for _ in 0..replications {
        for j in 0..n {
            comm[j] = sample_retransmissions(config.disconnect_probs[j], rng)? as f64;
            straggle[j] = sample_straggle(config.straggle_rates[j], rng)?;
        }
        for (a, st) in actions.iter().zip(stats.iter_mut()) {
            let chunk = subtask_size(task_size, a.k);
            times.clear();
            times.extend(a.subset.iter().map(|j| {
                subtask_serving_seconds(
                    comm[j] as u32,
                    config.slot_seconds,
                    straggle[j],
                    config.per_point_seconds[j],
                    chunk,
                )
            }));
            st.push(kth_min(&times, a.k)?);
        }
    }
    Ok(actions
        .iter()
        .zip(stats)
        .map(|(a, st)| ExpectedServeEstimate {
            action: *a,
            mean_seconds: st.mean,
            half_width_95: st.half_width(),
            replications,
        })
        .collect())
}

pub fn estimate_serving_time(
    config: &SystemConfig,
    task_size: u32,
    action: &Action,
    replications: usize,
    rng: &mut SimRng,
) -> Result<ExpectedServeEstimate> {
    Ok(estimate_many(config, task_size, std::slice::from_ref(action), replications, rng)?[0])
}

/// Every code action whose subset lies inside `available`, ranked by
/// estimated mean serving time (ties to the lower index).
pub fn rank_actions(
    config: &SystemConfig,
    space: &ActionSpace,
    task_size: u32,
    available: NodeSet,
    replications: usize,
    rng: &mut SimRng,
) -> Result<Vec<ExpectedServeEstimate>> {
    if available.is_empty() {
        return Err(Error::Domain("no available nodes".into()));
    }
    let candidates: Vec<Action> = space
        .actions()
        .iter()
        .filter(|a| !a.is_idle() && a.subset.is_subset(available))
        .copied()
        .collect();
    let mut ranked = estimate_many(config, task_size, &candidates, replications, rng)?;
    ranked.sort_by(|a, b| {
        a.mean_seconds
            .total_cmp(&b.mean_seconds)
            .then(a.action.index.cmp(&b.action.index))
    });
    Ok(ranked)
}

/// Exhaustive minimiser of expected serving time over `available`.
/// Exponential in the number of available nodes.
pub fn brute_force_argmin(
    config: &SystemConfig,
    space: &ActionSpace,
    task_size: u32,
    available: NodeSet,
    replications: usize,
    rng: &mut SimRng,
) -> Result<Action> {
    Ok(rank_actions(config, space, task_size, available, replications, rng)?[0].action)
}

/// The per-task argmin applied to the current head task, or idle when
/// nothing can be dispatched.
pub fn myopic_oracle_policy(
    state: &SystemState,
    mask: &ActionMask,
    rng: &mut SimRng,
    config: &SystemConfig,
    space: &ActionSpace,
    replications: usize,
) -> Result<Action> {
    let free = state.available_set();
    if state.head_task_size == 0 || free.is_empty() {
        return Ok(Action::IDLE);
    }
    let a = brute_force_argmin(config, space, state.head_task_size, free, replications, rng)?;
    debug_assert!(mask.is_feasible(a.index));
    Ok(a)
}

pub fn ranking_csv(ranked: &[ExpectedServeEstimate]) -> String {
    let mut out = String::from("rank,index,n,k,subset,mean_seconds,half_width_95,replications\n");
    for (i, e) in ranked.iter().enumerate() {
        let a = e.action;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            a.index,
            a.n,
            a.k,
            a.subset,
            e.mean_seconds,
            e.half_width_95,
            e.replications
        );
    }
    out
}

/// [`myopic_oracle_policy`] as a [`Policy`]. The argmin depends only on the
/// head-task size and the free set, so each pair is solved once, with a
/// stream derived from `seed` and the pair, and cached.
pub struct MyopicOracle {
    config: SystemConfig,
    space: Arc<ActionSpace>,
    replications: usize,
    seed: u64,
    cache: Mutex<HashMap<(u32, NodeSet), Action>>,
}

impl MyopicOracle {
    pub fn new(config: SystemConfig, space: Arc<ActionSpace>, replications: usize, seed: u64) -> Self {
        Self {
            config,
            space,
            replications,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl Policy for MyopicOracle {
    fn name(&self) -> &str {
        "myopic-oracle"
    }

    fn decide(&self, state: &SystemState, mask: &ActionMask, _rng: &mut SimRng) -> Action {
        let free = state.available_set();
        if state.head_task_size == 0 || free.is_empty() {
            return Action::IDLE;
        }
        let key = (state.head_task_size, free);
        if let Some(a) = self.cache.lock().expect("oracle cache").get(&key) {
            return *a;
        }
        let mix = (u64::from(key.0) << 32) | u64::from(free.bits());
        let mut rng = rng::derive(self.seed ^ mix.wrapping_mul(0x9E37_79B9_7F4A_7C15), rng::stream::ORACLE);
        let action = myopic_oracle_policy(state, mask, &mut rng, &self.config, &self.space, self.replications)
            .unwrap_or(Action::IDLE);
        self.cache.lock().expect("oracle cache").insert(key, action);
        action
    }
}
