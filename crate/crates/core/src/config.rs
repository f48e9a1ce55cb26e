//! Environment parameters.

use crate::error::{Error, Result};

/// All parameters of the simulated edge system.
///
/// Per-node vectors (`disconnect_probs`, `straggle_rates`,
/// `per_point_seconds`) are indexed by node and must have `num_nodes`
/// entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig {
    pub num_nodes: usize,
    /// Maximum number of resident tasks, including dispatched ones.
    pub queue_capacity: usize,
    /// Bernoulli arrival probability per slot.
    pub arrival_prob: f64,
    pub slot_seconds: f64,
    /// Task sizes in data points; each arrival draws one uniformly.
    pub task_sizes: Vec<u32>,
    /// Per-slot link disconnection probability of each node.
    pub disconnect_probs: Vec<f64>,
    /// Rate of the exponential straggling delay of each node, in 1/s.
    pub straggle_rates: Vec<f64>,
    /// Deterministic compute time per data point of each node.
    pub per_point_seconds: Vec<f64>,
    /// Normalisation bound for the task-size feature.
    pub f_max: u32,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_nodes: 5,
            queue_capacity: 10,
            arrival_prob: 0.7,
            slot_seconds: 1.0,
            task_sizes: vec![100, 200, 300],
            disconnect_probs: vec![0.1, 0.5, 0.2, 0.3, 0.9],
            straggle_rates: vec![0.1, 1.0, 0.5, 0.2, 2.0],
            per_point_seconds: vec![0.005; 5],
            f_max: 300,
        }
    }
}

impl SystemConfig {
    /// Homogeneous system of `n` identical nodes; handy in tests.
    pub fn uniform(n: usize, p: f64, lambda: f64, eta: f64) -> Self {
        Self {
            num_nodes: n,
            disconnect_probs: vec![p; n],
            straggle_rates: vec![lambda; n],
            per_point_seconds: vec![eta; n],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_nodes == 0 {
            return bad("num_nodes must be positive".into());
        }
        if self.num_nodes > crate::action::MAX_NODES {
            return bad(format!(
                "num_nodes {} exceeds the supported maximum {}",
                self.num_nodes,
                crate::action::MAX_NODES
            ));
        }
        if self.queue_capacity == 0 {
            return bad("queue_capacity must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.arrival_prob) {
            return bad(format!("arrival_prob {} not in [0, 1]", self.arrival_prob));
        }
        if !(self.slot_seconds > 0.0 && self.slot_seconds.is_finite()) {
            return bad(format!("slot_seconds {} must be positive", self.slot_seconds));
        }
        if self.task_sizes.is_empty() || self.task_sizes.contains(&0) {
            return bad("task_sizes must be a non-empty list of positive sizes".into());
        }
        for (name, len) in [
            ("disconnect_probs", self.disconnect_probs.len()),
            ("straggle_rates", self.straggle_rates.len()),
            ("per_point_seconds", self.per_point_seconds.len()),
        ] {
            if len != self.num_nodes {
                return bad(format!("{name} has {len} entries, expected {}", self.num_nodes));
            }
        }
        if let Some(p) = self.disconnect_probs.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return bad(format!("disconnect probability {p} not in [0, 1)"));
        }
        if let Some(l) = self.straggle_rates.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return bad(format!("straggle rate {l} must be positive"));
        }
        if let Some(e) = self.per_point_seconds.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return bad(format!("per-point time {e} must be non-negative"));
        }
        let largest = *self.task_sizes.iter().max().unwrap();
        if self.f_max < largest {
            return bad(format!("f_max {} below largest task size {largest}", self.f_max));
        }
        Ok(())
    }

    /// Distinct task sizes in ascending order.
    pub fn distinct_sizes(&self) -> Vec<u32> {
        let mut sizes = self.task_sizes.clone();
        sizes.sort_unstable();
        sizes.dedup();
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        SystemConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_certain_disconnection() {
        let mut c = SystemConfig::default();
        c.disconnect_probs[2] = 1.0;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn rejects_length_mismatch_and_small_fmax() {
        let mut c = SystemConfig::default();
        c.straggle_rates.pop();
        assert!(c.validate().is_err());

        let c = SystemConfig {
            f_max: 250,
            ..SystemConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
