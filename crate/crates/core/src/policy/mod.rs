//! Scheduling policies.
//!
//! A [`Policy`] maps the observed state and its feasibility mask to an
//! action. The baselines here need no training: [`Greedy`] spreads every
//! task over all free nodes with no redundancy, [`OneNode`] ships it whole
//! to one random free node, [`StaticCode`] uses all free nodes with the
//! closed-form optimal `k` for shifted-exponential stragglers, and
//! [`RandomPolicy`] samples uniformly among feasible actions.

mod lambert;

use std::sync::Arc;

use rand::seq::IteratorRandom;
use rand::Rng;

pub use lambert::lambert_w_minus1;

use crate::action::{Action, ActionMask, ActionSpace, NodeSet};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::sim::SystemState;

pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Picks an action; the result must be feasible under `mask`.
    fn decide(&self, state: &SystemState, mask: &ActionMask, rng: &mut SimRng) -> Action;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&self, state: &SystemState, mask: &ActionMask, rng: &mut SimRng) -> Action {
        (**self).decide(state, mask, rng)
    }
}

impl<P: Policy + ?Sized> Policy for Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&self, state: &SystemState, mask: &ActionMask, rng: &mut SimRng) -> Action {
        (**self).decide(state, mask, rng)
    }
}

/// Free nodes, or `None` when nothing can be dispatched.
fn dispatchable(state: &SystemState) -> Option<NodeSet> {
    let free = state.available_set();
    (state.head_task_size > 0 && !free.is_empty()).then_some(free)
}

pub struct Greedy {
    space: Arc<ActionSpace>,
}

impl Greedy {
    pub fn new(space: Arc<ActionSpace>) -> Self {
        Self { space }
    }
}

impl Policy for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&self, state: &SystemState, _mask: &ActionMask, _rng: &mut SimRng) -> Action {
        match dispatchable(state) {
            Some(free) => self.space.code(free.len(), free).unwrap_or(Action::IDLE),
            None => Action::IDLE,
        }
    }
}

pub struct OneNode {
    space: Arc<ActionSpace>,
}

impl OneNode {
    pub fn new(space: Arc<ActionSpace>) -> Self {
        Self { space }
    }
}

impl Policy for OneNode {
    fn name(&self) -> &str {
        "onenode"
    }

    fn decide(&self, state: &SystemState, _mask: &ActionMask, rng: &mut SimRng) -> Action {
        let Some(free) = dispatchable(state) else {
            return Action::IDLE;
        };
        let node = free.iter().choose(rng).expect("non-empty free set");
        self.space
            .code(1, NodeSet::from_iter([node]))
            .unwrap_or(Action::IDLE)
    }
}

/// How the static code estimates the common straggling rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LambdaHatMode {
    /// Mean rate over the currently free nodes.
    #[default]
    Available,
    /// Mean rate over every node.
    All,
}

impl std::str::FromStr for LambdaHatMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "available" => Ok(Self::Available),
            "all" => Ok(Self::All),
            other => Err(Error::InvalidConfig(format!(
                "lambda_hat mode must be `available` or `all`, got `{other}`"
            ))),
        }
    }
}

/// `round((1 + 1/W_{-1}(-e^{-lambda_hat - 1})) * available)`, ties up,
/// clamped to `[1, available]`.
pub fn static_optimal_k(available: usize, lambda_hat: f64) -> Result<usize> {
    if available == 0 {
        return Err(Error::Domain("static code needs at least one node".into()));
    }
    if !(lambda_hat > 0.0 && lambda_hat.is_finite()) {
        return Err(Error::Domain(format!("lambda_hat {lambda_hat} must be positive")));
    }
    let x = -(-lambda_hat - 1.0).exp();
    // once the argument underflows, W_-1 is effectively -inf
    let ratio = if x == 0.0 { 1.0 } else { 1.0 + 1.0 / lambert_w_minus1(x)? };
    let k = (ratio * available as f64 + 0.5).floor();
    Ok((k.max(1.0) as usize).min(available))
}

pub struct StaticCode {
    space: Arc<ActionSpace>,
    rates: Vec<f64>,
    mode: LambdaHatMode,
}

impl StaticCode {
    pub fn new(space: Arc<ActionSpace>, config: &SystemConfig, mode: LambdaHatMode) -> Self {
        Self {
            space,
            rates: config.straggle_rates.clone(),
            mode,
        }
    }

    pub fn lambda_hat(&self, free: NodeSet) -> f64 {
        let pick: Vec<f64> = match self.mode {
            LambdaHatMode::Available => free.iter().map(|j| self.rates[j]).collect(),
            LambdaHatMode::All => self.rates.clone(),
        };
        pick.iter().sum::<f64>() / pick.len() as f64
    }
}

impl Policy for StaticCode {
    fn name(&self) -> &str {
        "static"
    }

    fn decide(&self, state: &SystemState, _mask: &ActionMask, _rng: &mut SimRng) -> Action {
        let Some(free) = dispatchable(state) else {
            return Action::IDLE;
        };
        let k = static_optimal_k(free.len(), self.lambda_hat(free)).unwrap_or(free.len());
        self.space.code(k, free).unwrap_or(Action::IDLE)
    }
}

pub struct RandomPolicy {
    space: Arc<ActionSpace>,
}

impl RandomPolicy {
    pub fn new(space: Arc<ActionSpace>) -> Self {
        Self { space }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&self, _state: &SystemState, mask: &ActionMask, rng: &mut SimRng) -> Action {
        let count = mask.count();
        if count == 0 {
            return Action::IDLE;
        }
        let pick = rng.gen_range(0..count);
        let index = mask.feasible_indices().nth(pick).unwrap_or(0);
        self.space.actions()[index]
    }
}

/// Highest-scoring feasible index; ties go to the lowest index.
pub fn masked_argmax(scores: &[f64], mask: &ActionMask) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in mask.feasible_indices() {
        let s = scores[i];
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyMask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive;
    use proptest::prelude::*;

    fn space5() -> Arc<ActionSpace> {
        Arc::new(ActionSpace::new(5).unwrap())
    }

    fn state(f: u32, free: &[bool]) -> SystemState {
        SystemState {
            queue_count: 3,
            head_task_size: f,
            node_available: free.to_vec(),
        }
    }

    #[test]
    fn static_k_examples() {
        assert_eq!(static_optimal_k(5, 1.0).unwrap(), 3);
        for lam in [0.01, 1.0, 30.0] {
            assert_eq!(static_optimal_k(1, lam).unwrap(), 1);
        }
        // Ratio 1 + 1/W tends to 0 as the rate vanishes and to 1 as it grows.
        assert_eq!(static_optimal_k(5, 1e-6).unwrap(), 1);
        assert_eq!(static_optimal_k(5, 60.0).unwrap(), 5);
        assert!(static_optimal_k(0, 1.0).is_err());
        assert!(static_optimal_k(3, 0.0).is_err());
    }

    #[test]
    fn static_k_monotone_in_rate() {
        for avail in 1..=12 {
            let mut prev = 0;
            for i in 1..=400 {
                let lam = 0.01 * 1.03f64.powi(i);
                let k = static_optimal_k(avail, lam).unwrap();
                assert!(k >= prev, "avail={avail} lam={lam}");
                prev = k;
            }
        }
    }

    #[test]
    fn greedy_uses_every_free_node() {
        let g = Greedy::new(space5());
        let mut rng = derive(0, 0);
        let s = state(200, &[true, false, true, true, false]);
        let a = g.decide(&s, &ActionMask::all(81), &mut rng);
        assert_eq!((a.n, a.k), (3, 3));
        assert_eq!(a.subset, s.available_set());
        assert!(g.decide(&state(200, &[false; 5]), &ActionMask::all(81), &mut rng).is_idle());
        assert!(g.decide(&state(0, &[true; 5]), &ActionMask::all(81), &mut rng).is_idle());
    }

    #[test]
    fn onenode_is_uniform() {
        let p = OneNode::new(space5());
        let mut rng = derive(7, 1);
        let s = state(100, &[true; 5]);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            let a = p.decide(&s, &ActionMask::all(81), &mut rng);
            assert_eq!((a.n, a.k), (1, 1));
            counts[a.subset.iter().next().unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.2).abs() <= 0.01, "{counts:?}");
        }
        let forced = p.decide(&state(100, &[false, false, true, false, false]), &ActionMask::all(81), &mut rng);
        assert_eq!(forced.subset.iter().collect::<Vec<_>>(), vec![2]);
        assert!(p.decide(&state(100, &[false; 5]), &ActionMask::all(81), &mut rng).is_idle());
    }

    #[test]
    fn static_code_decisions() {
        let cfg = SystemConfig {
            straggle_rates: vec![1.0; 5],
            ..SystemConfig::default()
        };
        let p = StaticCode::new(space5(), &cfg, LambdaHatMode::Available);
        let mut rng = derive(0, 0);
        let a = p.decide(&state(300, &[true; 5]), &ActionMask::all(81), &mut rng);
        assert_eq!((a.n, a.k), (5, 3));
        let one = p.decide(&state(300, &[false, true, false, false, false]), &ActionMask::all(81), &mut rng);
        assert_eq!((one.n, one.k), (1, 1));
        assert!(p.decide(&state(0, &[true; 5]), &ActionMask::all(81), &mut rng).is_idle());
    }

    #[test]
    fn lambda_hat_modes() {
        let cfg = SystemConfig::default();
        let free = NodeSet::from_iter([1, 4]);
        let avail = StaticCode::new(space5(), &cfg, LambdaHatMode::Available);
        let all = StaticCode::new(space5(), &cfg, LambdaHatMode::All);
        assert!((avail.lambda_hat(free) - 1.5).abs() < 1e-12);
        assert!((all.lambda_hat(free) - 0.76).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_to_lowest() {
        let mask = ActionMask {
            feasible: vec![true, false, true, true],
        };
        assert_eq!(masked_argmax(&[0.0, 9.0, 2.0, 2.0], &mask).unwrap(), 2);
        let none = ActionMask {
            feasible: vec![false; 3],
        };
        assert!(matches!(masked_argmax(&[1.0; 3], &none), Err(Error::EmptyMask)));
    }

    proptest! {
        #[test]
        fn baselines_always_feasible(bits in 0u32..32, f_pick in 0usize..4, seed in 0u64..1000) {
            let space = space5();
            let cfg = SystemConfig::default();
            let free: Vec<bool> = (0..5).map(|j| (bits >> j) & 1 == 1).collect();
            let s = SystemState {
                queue_count: 4,
                head_task_size: [0, 100, 200, 300][f_pick],
                node_available: free,
            };
            let mask = space.feasibility_mask(&s);
            let policies: Vec<Box<dyn Policy>> = vec![
                Box::new(Greedy::new(space.clone())),
                Box::new(OneNode::new(space.clone())),
                Box::new(StaticCode::new(space.clone(), &cfg, LambdaHatMode::Available)),
                Box::new(StaticCode::new(space.clone(), &cfg, LambdaHatMode::All)),
                Box::new(RandomPolicy::new(space.clone())),
            ];
            let mut rng = derive(seed, 1);
            for p in &policies {
                let a = p.decide(&s, &mask, &mut rng);
                prop_assert!(mask.is_feasible(a.index), "{} chose {}", p.name(), a);
            }
        }
    }
}
