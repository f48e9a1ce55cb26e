//! The joint coding and scheduling action set.
//!
//! An action is either `Idle` or a triple `(n, k, subset)`: encode the head
//! task with an `(n, k)` MDS code and ship one coded chunk to each of the
//! `n` nodes in `subset`. Actions are enumerated once over the full node
//! set and masked at runtime, which keeps the index space (and therefore
//! the network output width) fixed.

use std::collections::HashMap;
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::sim::SystemState;

/// Node sets are bitmasks, so the node count is bounded by the mask width.
/// Enumeration is exponential anyway; anything past ~12 nodes is impractical.
pub const MAX_NODES: usize = 16;

/// A set of node indices stored as a bitmask; iteration is ascending.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet(u32);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_bits(bits: u32) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn full(n: usize) -> Self {
        NodeSet(((1u64 << n) - 1) as u32)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, node: usize) -> bool {
        node < 32 && (self.0 >> node) & 1 == 1
    }

    pub fn insert(&mut self, node: usize) {
        self.0 |= 1 << node;
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&j| (self.0 >> j) & 1 == 1)
    }

    /// Nodes whose availability flag is set.
    pub fn from_flags(flags: &[bool]) -> Self {
        flags
            .iter()
            .enumerate()
            .filter(|(_, &free)| free)
            .map(|(j, _)| j)
            .collect()
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = NodeSet::EMPTY;
        for j in iter {
            set.insert(j);
        }
        set
    }
}

impl fmt::Display for NodeSet {
    /// Space-separated 1-based node labels, e.g. `E1 E3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels = self.iter().map(|j| format!("E{}", j + 1)).join(" ");
        f.write_str(&labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Idle,
    Code,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub kind: ActionKind,
    pub n: usize,
    pub k: usize,
    pub subset: NodeSet,
    pub index: usize,
}

impl Action {
    pub const IDLE: Action = Action {
        kind: ActionKind::Idle,
        n: 0,
        k: 0,
        subset: NodeSet::EMPTY,
        index: 0,
    };

    pub fn is_idle(&self) -> bool {
        self.kind == ActionKind::Idle
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Idle => write!(f, "idle"),
            ActionKind::Code => write!(f, "({},{},{{{}}})", self.n, self.k, self.subset),
        }
    }
}

/// `1 + sum_n n * C(N, n)`, which simplifies to `1 + N * 2^(N-1)`.
pub fn action_count(num_nodes: usize) -> usize {
    1 + num_nodes * (1usize << (num_nodes - 1))
}

/// Canonical enumeration: Idle first, then by `n`, then lexicographic
/// subset, then `k`. The position in the list is the global index.
pub fn enumerate_actions(num_nodes: usize) -> Vec<Action> {
    let mut actions = vec![Action::IDLE];
    for n in 1..=num_nodes {
        for subset in (0..num_nodes).combinations(n) {
            let subset: NodeSet = subset.into_iter().collect();
            for k in 1..=n {
                actions.push(Action {
                    kind: ActionKind::Code,
                    n,
                    k,
                    subset,
                    index: actions.len(),
                });
            }
        }
    }
    actions
}

/// Per-index feasibility flags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionMask {
    pub feasible: Vec<bool>,
}

impl ActionMask {
    pub fn all(len: usize) -> Self {
        Self {
            feasible: vec![true; len],
        }
    }

    pub fn len(&self) -> usize {
        self.feasible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feasible.is_empty()
    }

    pub fn is_feasible(&self, index: usize) -> bool {
        self.feasible.get(index).copied().unwrap_or(false)
    }

    pub fn feasible_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.feasible
            .iter()
            .enumerate()
            .filter(|(_, &ok)| ok)
            .map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.feasible.iter().filter(|&&ok| ok).count()
    }
}

/// The enumerated action table for a fixed node count. Immutable once
/// built; share it behind an `Arc`.
#[derive(Clone, Debug)]
pub struct ActionSpace {
    num_nodes: usize,
    actions: Vec<Action>,
    by_code: HashMap<(usize, NodeSet), usize>,
}

impl ActionSpace {
    pub fn new(num_nodes: usize) -> Result<Self> {
        if num_nodes == 0 || num_nodes > MAX_NODES {
            return Err(Error::InvalidConfig(format!(
                "node count {num_nodes} outside 1..={MAX_NODES}"
            )));
        }
        let actions = enumerate_actions(num_nodes);
        let by_code = actions
            .iter()
            .filter(|a| !a.is_idle())
            .map(|a| ((a.k, a.subset), a.index))
            .collect();
        Ok(Self {
            num_nodes,
            actions,
            by_code,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn get(&self, index: usize) -> Option<&Action> {
        self.actions.get(index)
    }

    /// Looks up the `(|subset|, k, subset)` action.
    pub fn code(&self, k: usize, subset: NodeSet) -> Option<Action> {
        self.by_code.get(&(k, subset)).map(|&i| self.actions[i])
    }

    pub fn feasibility_mask(&self, state: &SystemState) -> ActionMask {
        let mut mask = ActionMask {
            feasible: vec![false; self.actions.len()],
        };
        mask.feasible[0] = true;
        if state.head_task_size > 0 {
            let free = state.available_set();
            for a in &self.actions[1..] {
                mask.feasible[a.index] = a.subset.is_subset(free);
            }
        }
        mask
    }

    /// The action table as CSV with columns `index,n,k,subset`; subsets are
    /// space-separated 1-based node labels.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,n,k,subset\n");
        for a in &self.actions {
            out.push_str(&format!("{},{},{},{}\n", a.index, a.n, a.k, a.subset));
        }
        out
    }
}

/// Size of each coded chunk when a task of `f` points is split `k` ways.
pub fn subtask_size(f: u32, k: usize) -> u32 {
    assert!(f >= 1 && k >= 1, "subtask_size needs f >= 1 and k >= 1");
    f.div_ceil(k as u32)
}
