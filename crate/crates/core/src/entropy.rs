//! Binary entropy and its inverse on `[0, 1/2]`.

use crate::error::{Error, Result};

/// `H2(p)` without domain checks; callers guarantee `p` in `[0, 1]`.
pub(crate) fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// `H2(p) = -p log2 p - (1-p) log2(1-p)`, with `H2(0) = H2(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain {
            value: p,
            domain: "[0, 1]",
        });
    }
    Ok(h2(p))
}

/// The `p` in `[0, 1/2]` with `H2(p) = y`, by bisection to `1e-12`.
pub fn binary_entropy_inv(y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain {
            value: y,
            domain: "[0, 1]",
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h2(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // one more halving past the stated precision keeps the round trip tight
    let mid = 0.5 * (lo + hi);
    Ok(if h2(mid) < y {
        0.5 * (mid + hi)
    } else {
        0.5 * (lo + mid)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // direct evaluation at 0.11
        let direct = -0.11 * 0.11f64.log2() - 0.89 * 0.89f64.log2();
        assert!((binary_entropy(0.11).unwrap() - direct).abs() < 1e-15);
        assert!((binary_entropy(0.11).unwrap() - 0.49992).abs() < 1e-5);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(binary_entropy_inv(1.0).unwrap(), 0.5);
        assert_eq!(binary_entropy_inv(0.0).unwrap(), 0.0);
        // independent oracle: plain bisection on H2 over [0, 1/2] to 1e-15
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            let h = -m * m.log2() - (1.0 - m) * (1.0 - m).log2();
            if h < 0.5 {
                lo = m
            } else {
                hi = m
            }
        }
        let got = binary_entropy_inv(0.5).unwrap();
        assert!((got - lo).abs() < 1e-12);
        assert!((got - 0.110028).abs() < 1e-6);
        assert!(binary_entropy_inv(2.0).is_err());
    }

    #[test]
    fn round_trip_on_uniform_grid() {
        for i in 0..1000 {
            let y = (i as f64 + 0.5) / 1000.0;
            let p = binary_entropy_inv(y).unwrap();
            assert!((binary_entropy(p).unwrap() - y).abs() < 1e-10, "y={y}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(y in 0.0f64..=1.0) {
            let p = binary_entropy_inv(y).unwrap();
            prop_assert!((0.0..=0.5).contains(&p));
            prop_assert!((binary_entropy(p).unwrap() - y).abs() < 1e-10);
        }
    }
}
