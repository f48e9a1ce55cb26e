//! Tabular Q-learning with epsilon-greedy exploration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::action::{Action, ActionMask, ActionSpace};
use crate::error::{Error, Result};
use crate::policy::{masked_argmax, Policy};
use crate::rng::SimRng;
use crate::sim::{Environment, StateKey, SystemState};

/// One temporal-difference step: `q + tau * (r + gamma * max_next - q)`.
pub fn q_update(q: f64, reward: f64, max_next_q: f64, tau: f64, gamma: f64) -> f64 {
    q + tau * (reward + gamma * max_next_q - q)
}

/// With probability `epsilon` a uniform feasible index, otherwise the
/// feasible argmax of `qrow` (lowest index on ties).
pub fn epsilon_greedy(qrow: &[f64], mask: &ActionMask, epsilon: f64, rng: &mut SimRng) -> Result<usize> {
    let count = mask.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    if rng.gen::<f64>() < epsilon {
        let pick = rng.gen_range(0..count);
        return Ok(mask.feasible_indices().nth(pick).expect("pick < count"));
    }
    masked_argmax(qrow, mask)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `c / (1 + t / d)`: square-summable but not summable.
    RobbinsMonro { c: f64, d: f64 },
}

impl LearningRate {
    pub fn at(&self, step: u64) -> f64 {
        match *self {
            LearningRate::Constant(tau) => tau,
            LearningRate::RobbinsMonro { c, d } => c / (1.0 + step as f64 / d),
        }
    }
}

/// Multiplicative per-step epsilon decay down to a floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub decay: f64,
    pub floor: f64,
}

impl EpsilonSchedule {
    pub fn at(&self, step: u64) -> f64 {
        (self.start * self.decay.powf(step as f64)).max(self.floor)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLearnConfig {
    pub learning_rate: LearningRate,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub iterations: u64,
}

impl Default for QLearnConfig {
    fn default() -> Self {
        Self {
            learning_rate: LearningRate::Constant(0.1),
            gamma: 0.9,
            epsilon: EpsilonSchedule {
                start: 1.0,
                decay: 0.99999,
                floor: 0.01,
            },
            iterations: 1_000_000,
        }
    }
}

impl QLearnConfig {
    pub fn validate(&self) -> Result<()> {
        let tau_ok = |t: f64| (0.0..1.0).contains(&t);
        let lr_ok = match self.learning_rate {
            LearningRate::Constant(t) => tau_ok(t),
            LearningRate::RobbinsMonro { c, d } => tau_ok(c) && d > 0.0,
        };
        if !lr_ok {
            return Err(Error::InvalidConfig("q-learning rate must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        let e = self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=e.start).contains(&e.floor) || !(e.decay > 0.0 && e.decay <= 1.0) {
            return Err(Error::InvalidConfig("bad epsilon schedule".into()));
        }
        Ok(())
    }
}

/// Sparse Q-table. Unseen entries read as zero; rows are allocated on
/// first write.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    action_count: usize,
    rows: BTreeMap<StateKey, Vec<f64>>,
}

impl QTable {
    pub fn new(action_count: usize) -> Self {
        Self {
            action_count,
            rows: BTreeMap::new(),
        }
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &StateKey> {
        self.rows.keys()
    }

    pub fn get(&self, key: &StateKey, action: usize) -> f64 {
        self.rows.get(key).map_or(0.0, |r| r[action])
    }

    /// The row for `key`, zeros if unseen.
    pub fn row(&self, key: &StateKey) -> std::borrow::Cow<'_, [f64]> {
        match self.rows.get(key) {
            Some(r) => std::borrow::Cow::Borrowed(r),
            None => std::borrow::Cow::Owned(vec![0.0; self.action_count]),
        }
    }

    pub fn set(&mut self, key: StateKey, action: usize, value: f64) {
        let n = self.action_count;
        self.rows.entry(key).or_insert_with(|| vec![0.0; n])[action] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.rows.values().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// One line per stored entry: `m,f,bitmask,action_index,q_value`.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        for (key, row) in &self.rows {
            for (a, q) in row.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    key.queue_count, key.head_task_size, key.available, a, q
                );
            }
        }
        out
    }

    pub fn from_checkpoint(text: &str, action_count: usize) -> Result<Self> {
        let mut table = QTable::new(action_count);
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::parse(line_no, "expected m,f,bitmask,action_index,q_value"));
            }
            let int = |s: &str| s.trim().parse::<u32>().map_err(|e| Error::parse(line_no, e.to_string()));
            let key = StateKey {
                queue_count: int(fields[0])?,
                head_task_size: int(fields[1])?,
                available: int(fields[2])?,
            };
            let action = int(fields[3])? as usize;
            if action >= action_count {
                return Err(Error::parse(line_no, format!("action {action} out of range")));
            }
            let q: f64 = fields[4]
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::parse(line_no, e.to_string()))?;
            if !q.is_finite() {
                return Err(Error::parse(line_no, "non-finite q-value"));
            }
            table.set(key, action, q);
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, action_count: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text, action_count)
    }
}

#[derive(Clone, Debug)]
pub struct QLearnOutcome {
    pub table: QTable,
    /// Mean training reward over consecutive windows of `report_every` steps.
    pub reward_curve: Vec<(u64, f64)>,
}

/// Runs `config.iterations` steps of Q-learning along one trajectory.
pub fn train_qlearning<E: Environment>(
    env: &mut E,
    config: &QLearnConfig,
    rng: &mut SimRng,
) -> Result<QLearnOutcome> {
    config.validate()?;
    let report_every = (config.iterations / 100).max(1);
    let mut table = QTable::new(env.action_count());
    let mut curve = Vec::new();
    let mut window = 0.0;
    let mut key = env.state_key();
    let mut mask = env.action_mask();
    for t in 0..config.iterations {
        let eps = config.epsilon.at(t);
        let action = epsilon_greedy(&table.row(&key), &mask, eps, rng)?;
        let reward = env.step_action(action)?;
        let next_key = env.state_key();
        let next_mask = env.action_mask();
        let row = table.row(&next_key);
        let max_next = next_mask
            .feasible_indices()
            .map(|a| row[a])
            .fold(f64::NEG_INFINITY, f64::max);
        let updated = q_update(
            table.get(&key, action),
            reward,
            max_next,
            config.learning_rate.at(t),
            config.gamma,
        );
        table.set(key, action, updated);
        key = next_key;
        mask = next_mask;

        window += reward;
        if (t + 1) % report_every == 0 {
            curve.push((t + 1, window / report_every as f64));
            window = 0.0;
        }
    }
    Ok(QLearnOutcome {
        table,
        reward_curve: curve,
    })
}

/// Greedy policy read off a frozen Q-table.
pub struct QTablePolicy {
    table: QTable,
    space: std::sync::Arc<ActionSpace>,
}

impl QTablePolicy {
    pub fn new(table: QTable, space: std::sync::Arc<ActionSpace>) -> Result<Self> {
        if table.action_count() != space.len() {
            return Err(Error::Dimension {
                expected: space.len(),
                actual: table.action_count(),
            });
        }
        Ok(Self { table, space })
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }
}

impl Policy for QTablePolicy {
    fn name(&self) -> &str {
        "qlearn"
    }

    fn decide(&self, state: &SystemState, mask: &ActionMask, _rng: &mut SimRng) -> Action {
        let index = masked_argmax(&self.table.row(&state.key()), mask).unwrap_or(0);
        self.space.actions()[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive;
    use crate::sim::{EdgeEnv, TwoArmedBandit};
    use crate::SystemConfig;
    use proptest::prelude::*;

    #[test]
    fn update_examples() {
        assert!((q_update(0.0, -3.0, 0.0, 0.1, 0.9) + 0.3).abs() < 1e-12);
        assert_eq!(q_update(-4.2, -3.0, -7.0, 0.0, 0.9), -4.2);
        let fixed = -3.0 + 0.9 * -5.0;
        assert_eq!(q_update(fixed, -3.0, -5.0, 0.1, 0.9), fixed);
    }

    #[test]
    fn greedy_selection() {
        let mut rng = derive(0, 2);
        let mut row = vec![0.0; 10];
        row[7] = 1.0;
        assert_eq!(epsilon_greedy(&row, &ActionMask::all(10), 0.0, &mut rng).unwrap(), 7);

        let mut only_idle = ActionMask { feasible: vec![false; 10] };
        only_idle.feasible[0] = true;
        for eps in [0.0, 0.5, 1.0] {
            assert_eq!(epsilon_greedy(&row, &only_idle, eps, &mut rng).unwrap(), 0);
        }
        let none = ActionMask { feasible: vec![false; 10] };
        assert!(epsilon_greedy(&row, &none, 1.0, &mut rng).is_err());
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = derive(11, 2);
        let mask = ActionMask {
            feasible: vec![true, false, true, true, false, true],
        };
        let row = [5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut counts = [0usize; 6];
        let draws = 100_000;
        for _ in 0..draws {
            counts[epsilon_greedy(&row, &mask, 1.0, &mut rng).unwrap()] += 1;
        }
        assert_eq!(counts[1] + counts[4], 0);
        for i in [0, 2, 3, 5] {
            let freq = counts[i] as f64 / draws as f64;
            assert!((freq - 0.25).abs() <= 0.01, "{counts:?}");
        }
    }

    #[test]
    fn zero_iterations_leave_empty_table() {
        let mut env = TwoArmedBandit::default();
        let cfg = QLearnConfig {
            iterations: 0,
            ..QLearnConfig::default()
        };
        let out = train_qlearning(&mut env, &cfg, &mut derive(0, 2)).unwrap();
        assert!(out.table.is_empty());
        assert_eq!(out.table.get(&env.state_key(), 1), 0.0);
    }

    #[test]
    fn learns_bandit() {
        let mut env = TwoArmedBandit::default();
        let cfg = QLearnConfig {
            iterations: 10_000,
            epsilon: EpsilonSchedule { start: 1.0, decay: 0.999, floor: 0.05 },
            ..QLearnConfig::default()
        };
        let out = train_qlearning(&mut env, &cfg, &mut derive(3, 2)).unwrap();
        let row = out.table.row(&env.state_key());
        // Fixed points at gamma 0.9: -1/(1-0.9) = -10 and -2 + 0.9 * -10 = -11.
        assert!(row[0] > row[1]);
        assert!((row[0] + 10.0).abs() < 0.5, "{row:?}");
    }

    #[test]
    fn values_stay_bounded_and_keys_in_space() {
        let cfg_sys = SystemConfig::default();
        let mut env = EdgeEnv::new(cfg_sys.clone(), 5).unwrap();
        let cfg = QLearnConfig {
            iterations: 50_000,
            ..QLearnConfig::default()
        };
        let out = train_qlearning(&mut env, &cfg, &mut derive(5, 2)).unwrap();
        let bound = cfg_sys.queue_capacity as f64 / (1.0 - cfg.gamma);
        assert!(out.table.max_abs() <= bound + 1e-9);
        let sizes = cfg_sys.distinct_sizes();
        let limit = (cfg_sys.queue_capacity + 1) * (sizes.len() + 1) * (1 << cfg_sys.num_nodes);
        assert!(out.table.len() <= limit);
        for k in out.table.keys() {
            assert!(k.queue_count as usize <= cfg_sys.queue_capacity);
            assert!(k.head_task_size == 0 || sizes.contains(&k.head_task_size));
            assert!(k.available < 1 << cfg_sys.num_nodes);
        }
    }

    #[test]
    fn robbins_monro_schedule() {
        let lr = LearningRate::RobbinsMonro { c: 0.5, d: 100.0 };
        assert_eq!(lr.at(0), 0.5);
        assert!((lr.at(100) - 0.25).abs() < 1e-12);
        assert!(QLearnConfig { gamma: 1.0, ..QLearnConfig::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trips(entries in prop::collection::vec((0u32..11, 0u32..400, 0u32..32, 0usize..81, -1e3f64..1e3), 0..50)) {
            let mut table = QTable::new(81);
            for (m, f, bits, a, q) in entries {
                table.set(StateKey { queue_count: m, head_task_size: f, available: bits }, a, q);
            }
            let back = QTable::from_checkpoint(&table.to_checkpoint(), 81).unwrap();
            prop_assert_eq!(back, table);
        }
    }
}
