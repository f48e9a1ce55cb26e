use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::rng::{self, stream};
use crate::sim::{Counters, EdgeEnv};

/// Long-run performance of one policy on one seeded run. Rates and means
/// cover the post-warmup window; the `totals` counters cover the whole run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// Mean resident tasks per slot (minus the mean reward).
    pub avg_queue_occupancy: f64,
    /// Dropped arrivals per slot.
    pub drop_rate: f64,
    pub drops_per_arrival: f64,
    /// Mean of completion minus arrival slot over tasks completed in the window.
    pub avg_delay_slots: f64,
    pub avg_delay_seconds: f64,
    /// Completions per slot.
    pub throughput: f64,
    pub slots_run: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub totals: Counters,
    pub resident_at_end: u64,
}

impl RunMetrics {
    /// `|L - lambda W| / L`; zero for an empty system.
    pub fn littles_law_residual(&self) -> f64 {
        if self.avg_queue_occupancy == 0.0 {
            return 0.0;
        }
        (self.avg_queue_occupancy - self.throughput * self.avg_delay_slots).abs() / self.avg_queue_occupancy
    }

    /// Arrivals equal completions plus drops plus tasks still resident.
    pub fn conserves_tasks(&self) -> bool {
        let c = self.totals;
        c.arrivals == c.completions + c.drops + self.resident_at_end
    }
}

/// Runs `policy` for `eval_slots` slots and measures everything after the
/// first `warmup` slots. Policies are queried deterministically from a
/// stream derived from `seed`; learned policies act greedily.
pub fn evaluate_policy(
    config: &SystemConfig,
    policy: &dyn Policy,
    eval_slots: u64,
    warmup: u64,
    seed: u64,
) -> Result<RunMetrics> {
    if eval_slots <= warmup {
        return Err(Error::InvalidConfig(format!(
            "eval_slots {eval_slots} must exceed warmup {warmup}"
        )));
    }
    let mut env = EdgeEnv::new(config.clone(), seed)?;
    let mut prng = rng::derive(seed, stream::POLICY);
    let (mut occupancy, mut drops, mut arrivals_before) = (0u64, 0u64, 0u64);
    let (mut completions, mut delay_sum) = (0u64, 0u64);
    for t in 0..eval_slots {
        if t == warmup {
            arrivals_before = env.counters().arrivals;
        }
        let state = env.state();
        let mask = env.mask();
        let action = policy.decide(&state, &mask, &mut prng);
        if !mask.is_feasible(action.index) {
            return Err(Error::InfeasibleAction {
                index: action.index,
                reason: format!("policy `{}` chose an infeasible action", policy.name()),
            });
        }
        let out = env.step(action.index)?;
        if t >= warmup {
            occupancy += (-out.reward) as u64;
            drops += out.dropped_this_slot as u64;
            for task in &out.completed {
                completions += 1;
                delay_sum += task.delay_slots().expect("completed task has a slot");
            }
        }
    }
    let slots = eval_slots - warmup;
    let window_arrivals = env.counters().arrivals - arrivals_before;
    let avg_delay_slots = if completions > 0 {
        delay_sum as f64 / completions as f64
    } else {
        0.0
    };
    Ok(RunMetrics {
        avg_queue_occupancy: occupancy as f64 / slots as f64,
        drop_rate: drops as f64 / slots as f64,
        drops_per_arrival: if window_arrivals > 0 {
            drops as f64 / window_arrivals as f64
        } else {
            0.0
        },
        avg_delay_slots,
        avg_delay_seconds: avg_delay_slots * config.slot_seconds,
        throughput: completions as f64 / slots as f64,
        slots_run: slots,
        warmup_slots: warmup,
        seed,
        totals: env.counters(),
        resident_at_end: env.resident_count() as u64,
    })
}
