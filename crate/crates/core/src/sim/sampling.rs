//! Link, straggler and serving-time model of a single coded chunk.

use crate::error::{Error, Result};
use crate::rng::{open_unit, SimRng};

/// Slots needed to get one message across a link that drops each attempt
/// with probability `p`: geometric on {1, 2, ...} with success `1 - p`.
pub fn sample_retransmissions(p: f64, rng: &mut SimRng) -> Result<u32> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "disconnect probability {p} must lie in [0, 1)"
        )));
    }
    if p == 0.0 {
        return Ok(1);
    }
    // Inverse CDF: P(H > x) = p^x.
    let extra = (open_unit(rng).ln() / p.ln()).floor();
    Ok(1 + extra.min(u32::MAX as f64 - 1.0) as u32)
}

/// Exponential straggling delay with rate `lambda` (mean `1/lambda` s).
pub fn sample_straggle(lambda: f64, rng: &mut SimRng) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("straggle rate {lambda} must be positive")));
    }
    Ok(-open_unit(rng).ln() / lambda)
}

/// Serving time of one chunk: round trip over the link, straggling delay
/// and deterministic compute, `2 H xi + straggle + eta * size`.
pub fn subtask_serving_seconds(
    retransmissions: u32,
    slot_seconds: f64,
    straggle: f64,
    per_point_seconds: f64,
    subtask_size: u32,
) -> f64 {
    debug_assert!(retransmissions >= 1 && subtask_size >= 1);
    2.0 * retransmissions as f64 * slot_seconds + straggle + per_point_seconds * subtask_size as f64
}

/// Whole slots a chunk occupies its node, at least one.
pub fn seconds_to_slots(seconds: f64, slot_seconds: f64) -> u64 {
    ((seconds / slot_seconds).ceil() as u64).max(1)
}

/// The `k`-th smallest value (1-based, duplicates counted).
pub fn kth_min<T: Copy + PartialOrd>(values: &[T], k: usize) -> Result<T> {
    if k == 0 || k > values.len() {
        return Err(Error::Domain(format!(
            "order statistic {k} out of range for {} values",
            values.len()
        )));
    }
    let mut scratch = values.to_vec();
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, |a, b| {
        a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(*kth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive;
    use proptest::prelude::*;

    #[test]
    fn perfect_link_never_retransmits() {
        let mut rng = derive(1, 0);
        for _ in 0..1000 {
            assert_eq!(sample_retransmissions(0.0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn geometric_pmf_at_half() {
        let mut rng = derive(2, 0);
        let draws = 200_000;
        let twos = (0..draws)
            .filter(|_| sample_retransmissions(0.5, &mut rng).unwrap() == 2)
            .count();
        let freq = twos as f64 / draws as f64;
        // P(H = 2) = 0.5 * 0.5; binomial sd at this n is ~0.001.
        assert!((freq - 0.25).abs() < 0.005, "{freq}");
    }

    #[test]
    fn sampler_domains() {
        let mut rng = derive(3, 0);
        assert!(sample_retransmissions(1.0, &mut rng).is_err());
        assert!(sample_retransmissions(-0.1, &mut rng).is_err());
        assert!(sample_straggle(0.0, &mut rng).is_err());
        assert!(sample_straggle(-2.0, &mut rng).is_err());
    }

    #[test]
    fn huge_rate_degenerates_to_zero() {
        let mut rng = derive(4, 0);
        for _ in 0..1000 {
            let x = sample_straggle(1e9, &mut rng).unwrap();
            assert!((0.0..1e-6).contains(&x));
        }
    }

    #[test]
    fn serving_time_examples() {
        assert!((subtask_serving_seconds(2, 1.0, 0.3, 0.005, 150) - 5.05).abs() < 1e-12);
        assert_eq!(subtask_serving_seconds(1, 1.0, 0.0, 0.0, 1), 2.0);
        assert!((subtask_serving_seconds(1, 0.5, 1.0, 0.01, 100) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn slot_quantisation() {
        assert_eq!(seconds_to_slots(2.5, 1.0), 3);
        assert_eq!(seconds_to_slots(3.0, 1.0), 3);
        assert_eq!(seconds_to_slots(0.0, 1.0), 1);
        assert_eq!(seconds_to_slots(2.5, 0.5), 5);
    }

    #[test]
    fn kth_min_examples() {
        assert_eq!(kth_min(&[1, 5, 10, 4, 6], 3).unwrap(), 5);
        assert_eq!(kth_min(&[42.5], 1).unwrap(), 42.5);
        assert_eq!(kth_min(&[7, 2, 9], 3).unwrap(), 9);
        assert_eq!(kth_min(&[3, 3, 1], 2).unwrap(), 3);
        assert!(kth_min(&[1, 2], 0).is_err());
        assert!(kth_min(&[1, 2], 3).is_err());
    }

    proptest! {
        #[test]
        fn kth_min_matches_sort(values in prop::collection::vec(-1000i64..1000, 1..40), pick in 0usize..40) {
            let k = pick % values.len() + 1;
            let mut sorted = values.clone();
            sorted.sort();
            prop_assert_eq!(kth_min(&values, k).unwrap(), sorted[k - 1]);
        }
    }
}
