use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;

use super::sampling::{
    kth_min, sample_retransmissions, sample_straggle, seconds_to_slots, subtask_serving_seconds,
};
use crate::action::{subtask_size, Action, ActionMask, ActionSpace, NodeSet};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

/// What the scheduler observes: resident task count, size of the earliest
/// undispatched task (0 if none) and which nodes are free.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub queue_count: usize,
    pub head_task_size: u32,
    pub node_available: Vec<bool>,
}

impl SystemState {
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            queue_count: 0,
            head_task_size: 0,
            node_available: vec![true; num_nodes],
        }
    }

    pub fn available_set(&self) -> NodeSet {
        NodeSet::from_flags(&self.node_available)
    }

    pub fn key(&self) -> StateKey {
        StateKey {
            queue_count: self.queue_count as u32,
            head_task_size: self.head_task_size,
            available: self.available_set().bits(),
        }
    }
}

/// Hashable, discrete form of a [`SystemState`], used as a Q-table key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub queue_count: u32,
    pub head_task_size: u32,
    pub available: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearningTask {
    pub id: u64,
    pub size: u32,
    pub arrival_slot: u64,
    pub dispatch_slot: Option<u64>,
    pub completion_slot: Option<u64>,
}

impl LearningTask {
    pub fn delay_slots(&self) -> Option<u64> {
        self.completion_slot.map(|c| c - self.arrival_slot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub node: usize,
    pub completion_slot: u64,
}

/// A dispatched task: one coded chunk per assigned node. The task is
/// decoded once `k` chunks are back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InFlightTask {
    pub task_id: u64,
    pub k: usize,
    pub assignments: Vec<Assignment>,
    pub task_completion_slot: u64,
}

impl InFlightTask {
    /// `task_completion_slot` is the k-th smallest chunk completion slot.
    pub fn is_consistent(&self) -> bool {
        let slots: Vec<u64> = self.assignments.iter().map(|a| a.completion_slot).collect();
        self.k >= 1
            && self.k <= slots.len()
            && kth_min(&slots, self.k).ok() == Some(self.task_completion_slot)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Minus the number of resident tasks after the action.
    pub reward: i32,
    pub next_state: SystemState,
    /// 1 if the arrival that opened the next slot was dropped.
    pub dropped_this_slot: u8,
    /// Tasks decoded at the start of the next slot.
    pub completed: Vec<LearningTask>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub arrivals: u64,
    pub drops: u64,
    pub completions: u64,
}

/// Encodes `task` with `action` and samples when each chunk returns.
///
/// Each assigned node draws one retransmission count (covering both link
/// directions) and one straggling delay; its serving time is quantised to
/// `max(1, ceil(seconds / xi))` slots after `current_slot`.
pub fn dispatch(
    task: &LearningTask,
    action: &Action,
    current_slot: u64,
    node_available: &[bool],
    config: &SystemConfig,
    rng: &mut SimRng,
) -> Result<InFlightTask> {
    let reject = |reason: String| Error::InfeasibleAction {
        index: action.index,
        reason,
    };
    if action.is_idle() {
        return Err(reject("idle action cannot dispatch".into()));
    }
    if task.dispatch_slot.is_some() {
        return Err(reject(format!("task {} already dispatched", task.id)));
    }
    if action.subset.len() != action.n {
        return Err(reject(format!(
            "subset has {} nodes but n = {}",
            action.subset.len(),
            action.n
        )));
    }
    if action.k == 0 || action.k > action.n {
        return Err(reject(format!("k = {} outside 1..={}", action.k, action.n)));
    }
    if let Some(j) = action.subset.iter().find(|&j| !node_available.get(j).copied().unwrap_or(false)) {
        return Err(reject(format!("node {} is busy or does not exist", j + 1)));
    }

    let chunk = subtask_size(task.size, action.k);
    let mut assignments = Vec::with_capacity(action.n);
    for j in action.subset.iter() {
        let h = sample_retransmissions(config.disconnect_probs[j], rng)?;
        let straggle = sample_straggle(config.straggle_rates[j], rng)?;
        let secs = subtask_serving_seconds(
            h,
            config.slot_seconds,
            straggle,
            config.per_point_seconds[j],
            chunk,
        );
        assignments.push(Assignment {
            node: j,
            completion_slot: current_slot + seconds_to_slots(secs, config.slot_seconds),
        });
    }
    let slots: Vec<u64> = assignments.iter().map(|a| a.completion_slot).collect();
    let task_completion_slot = kth_min(&slots, action.k)?;
    Ok(InFlightTask {
        task_id: task.id,
        k: action.k,
        assignments,
        task_completion_slot,
    })
}

/// Normalised features `(m/M, f/f_max, e_1, ..., e_N)`.
pub fn encode_state(state: &SystemState, config: &SystemConfig) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.node_available.len() + 2);
    x.push(state.queue_count as f64 / config.queue_capacity as f64);
    x.push(state.head_task_size as f64 / config.f_max as f64);
    x.extend(state.node_available.iter().map(|&e| if e { 1.0 } else { 0.0 }));
    x
}

/// The slotted MEC-server world.
///
/// Each slot proceeds as: decoded tasks leave (their straggling chunks
/// are cancelled and those nodes freed), then a Bernoulli arrival joins
/// the queue or is dropped, then the scheduler's action is applied to the
/// earliest undispatched task, then the reward `-m` is recorded. The
/// observable [`SystemState`] sits between the arrival and the action, so
/// [`EdgeEnv::step`] applies the action, records the reward and then runs
/// the departures and arrival that open the next slot.
#[derive(Clone, Debug)]
pub struct EdgeEnv {
    config: SystemConfig,
    space: Arc<ActionSpace>,
    rng: SimRng,
    slot: u64,
    next_id: u64,
    resident: VecDeque<LearningTask>,
    in_flight: Vec<InFlightTask>,
    holder: Vec<Option<u64>>,
    counters: Counters,
}

impl EdgeEnv {
    pub fn new(config: SystemConfig, seed: u64) -> Result<Self> {
        let space = Arc::new(ActionSpace::new(config.num_nodes)?);
        Self::with_space(config, space, seed)
    }

    pub fn with_space(config: SystemConfig, space: Arc<ActionSpace>, seed: u64) -> Result<Self> {
        config.validate()?;
        if space.num_nodes() != config.num_nodes {
            return Err(Error::Dimension {
                expected: config.num_nodes,
                actual: space.num_nodes(),
            });
        }
        let mut env = Self {
            holder: vec![None; config.num_nodes],
            config,
            space,
            rng: rng::derive(seed, rng::stream::ENV),
            slot: 0,
            next_id: 0,
            resident: VecDeque::new(),
            in_flight: Vec::new(),
            counters: Counters::default(),
        };
        env.open_slot();
        Ok(env)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn action_space(&self) -> &Arc<ActionSpace> {
        &self.space
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn resident_count(&self) -> usize {
        self.resident.len()
    }

    pub fn resident_tasks(&self) -> impl Iterator<Item = &LearningTask> {
        self.resident.iter()
    }

    pub fn in_flight(&self) -> &[InFlightTask] {
        &self.in_flight
    }

    pub fn state(&self) -> SystemState {
        SystemState {
            queue_count: self.resident.len(),
            head_task_size: self.head().map_or(0, |t| t.size),
            node_available: self.holder.iter().map(Option::is_none).collect(),
        }
    }

    pub fn mask(&self) -> ActionMask {
        self.space.feasibility_mask(&self.state())
    }

    pub fn features(&self) -> Vec<f64> {
        encode_state(&self.state(), &self.config)
    }

    fn head(&self) -> Option<&LearningTask> {
        self.resident.iter().find(|t| t.dispatch_slot.is_none())
    }

    /// Applies the action with global index `index` to the current slot and
    /// advances to the next one.
    pub fn step(&mut self, index: usize) -> Result<StepOutcome> {
        let action = *self.space.get(index).ok_or_else(|| Error::InfeasibleAction {
            index,
            reason: format!("index outside 0..{}", self.space.len()),
        })?;
        if !action.is_idle() {
            let pos = self
                .resident
                .iter()
                .position(|t| t.dispatch_slot.is_none())
                .ok_or_else(|| Error::InfeasibleAction {
                    index,
                    reason: "no undispatched task".into(),
                })?;
            let available: Vec<bool> = self.holder.iter().map(Option::is_none).collect();
            let flight = dispatch(
                &self.resident[pos],
                &action,
                self.slot,
                &available,
                &self.config,
                &mut self.rng,
            )?;
            for a in &flight.assignments {
                self.holder[a.node] = Some(flight.task_id);
            }
            self.resident[pos].dispatch_slot = Some(self.slot);
            self.in_flight.push(flight);
        }

        let reward = -(self.resident.len() as i32);
        self.slot += 1;
        let (dropped, completed) = self.open_slot();
        Ok(StepOutcome {
            reward,
            next_state: self.state(),
            dropped_this_slot: dropped as u8,
            completed,
        })
    }

    /// Departures then arrival at the start of `self.slot`.
    fn open_slot(&mut self) -> (bool, Vec<LearningTask>) {
        let now = self.slot;
        let mut done_ids = Vec::new();
        for flight in &self.in_flight {
            let finished = flight.task_completion_slot == now;
            for a in &flight.assignments {
                let owns = self.holder[a.node] == Some(flight.task_id);
                // A chunk frees its node when it returns; once the task is
                // decoded the chunks still running are cancelled.
                if owns && (a.completion_slot == now || finished) {
                    self.holder[a.node] = None;
                }
            }
            if finished {
                done_ids.push(flight.task_id);
            }
        }
        let mut completed = Vec::with_capacity(done_ids.len());
        if !done_ids.is_empty() {
            self.in_flight.retain(|f| f.task_completion_slot != now);
            self.resident.retain(|t| {
                if done_ids.contains(&t.id) {
                    let mut t = t.clone();
                    t.completion_slot = Some(now);
                    completed.push(t);
                    false
                } else {
                    true
                }
            });
            self.counters.completions += completed.len() as u64;
        }

        let mut dropped = false;
        if self.rng.gen::<f64>() < self.config.arrival_prob {
            let size = self.config.task_sizes[self.rng.gen_range(0..self.config.task_sizes.len())];
            self.counters.arrivals += 1;
            if self.resident.len() >= self.config.queue_capacity {
                self.counters.drops += 1;
                dropped = true;
            } else {
                self.resident.push_back(LearningTask {
                    id: self.next_id,
                    size,
                    arrival_slot: now,
                    dispatch_slot: None,
                    completion_slot: None,
                });
                self.next_id += 1;
            }
        }
        (dropped, completed)
    }

    /// Checks the structural invariants of the world; returns a description
    /// of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let m = self.resident.len();
        if m > self.config.queue_capacity {
            return Err(format!("{m} resident tasks exceed capacity"));
        }
        let c = self.counters;
        if c.arrivals != c.completions + c.drops + m as u64 {
            return Err(format!("conservation broken: {c:?} with {m} resident"));
        }
        for flight in &self.in_flight {
            if !flight.is_consistent() {
                return Err(format!("task {} completion is not the k-th chunk", flight.task_id));
            }
            if !self.resident.iter().any(|t| t.id == flight.task_id) {
                return Err(format!("in-flight task {} not resident", flight.task_id));
            }
        }
        for (j, holder) in self.holder.iter().enumerate() {
            let running: Vec<u64> = self
                .in_flight
                .iter()
                .filter(|f| f.assignments.iter().any(|a| a.node == j && a.completion_slot > self.slot))
                .map(|f| f.task_id)
                .collect();
            match holder {
                Some(id) if running != [*id] => {
                    return Err(format!("node {j} held by {id} but running {running:?}"))
                }
                None if !running.is_empty() => {
                    return Err(format!("node {j} free but running {running:?}"))
                }
                _ => {}
            }
        }
        let state = self.state();
        let undispatched = self.resident.iter().any(|t| t.dispatch_slot.is_none());
        if (state.head_task_size == 0) == undispatched {
            return Err("head task size disagrees with queue contents".into());
        }
        Ok(())
    }
}
