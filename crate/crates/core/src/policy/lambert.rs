//! Lower branch of the Lambert W function.

use crate::error::{Error, Result};

const INV_E: f64 = 0.367_879_441_171_442_33;

/// `W_{-1}(x)`: the solution `w <= -1` of `w * e^w = x` for `x` in
/// `[-1/e, 0)`.
///
/// On `(-inf, -1]` the map `w -> w e^w` decreases from `0` to `-1/e`, so
/// the root is bracketed and bisected, then polished with Halley steps
/// that are kept only while they stay in the bracket and lower the
/// residual.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    if !(-INV_E - 1e-15..0.0).contains(&x) {
        return Err(Error::Domain(format!("W_-1 is defined on [-1/e, 0), got {x}")));
    }
    if x <= -INV_E {
        return Ok(-1.0);
    }
    let g = |w: f64| w * w.exp() - x;

    // g(-1) < 0; walk left until g > 0.
    let mut hi = -1.0_f64;
    let mut lo = -2.0_f64;
    while g(lo) <= 0.0 {
        hi = lo;
        lo *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w = if g(lo).abs() < g(hi).abs() { lo } else { hi };

    for _ in 0..8 {
        let ew = w.exp();
        let f = w * ew - x;
        let d1 = ew * (w + 1.0);
        let denom = d1 - (w + 2.0) * f / (2.0 * (w + 1.0));
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let next = w - f / denom;
        if !(next <= -1.0 && next.is_finite()) || g(next).abs() >= f.abs() {
            break;
        }
        w = next;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection on `w e^w = x`, independent of the solver above.
    fn bisect_oracle(x: f64) -> f64 {
        let (mut lo, mut hi) = (-50.0_f64, -1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.exp() > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn branch_point() {
        assert_eq!(lambert_w_minus1(-(-1.0f64).exp()).unwrap(), -1.0);
    }

    #[test]
    fn agrees_with_bisection() {
        // Oracle values: -0.1 -> -3.577152063957297, -e^-2 -> -3.146193220620583.
        for x in [-0.1, -(-2.0f64).exp(), -0.3, -1e-6] {
            let w = lambert_w_minus1(x).unwrap();
            assert!((w - bisect_oracle(x)).abs() < 1e-9, "x={x}: {w}");
        }
        assert!((lambert_w_minus1(-0.1).unwrap() + 3.577152).abs() < 1e-6);
        assert!((lambert_w_minus1(-(-2.0f64).exp()).unwrap() + 3.1462).abs() < 1e-4);
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(0.5).is_err());
        assert!(lambert_w_minus1(-0.4).is_err());
        assert!(lambert_w_minus1(f64::NAN).is_err());
    }
}
