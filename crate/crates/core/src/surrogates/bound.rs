use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};

/// Concave lower bound of `log2(1 + x / y)` around `(x_bar, y_bar)`:
///
/// `log2(1 + x_bar/y_bar) + log2(e) (x_bar/y_bar) (2 sqrt(x/x_bar) - (x + y)/(x_bar + y_bar) - 1)`.
///
/// Equal to the true value at `(x_bar, y_bar)` with matching gradient, and
/// never above it.
pub fn ratio_log_bound(x: f64, y: f64, x_bar: f64, y_bar: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositive("x"));
    }
    if !(y > 0.0) {
        return Err(Error::NonPositive("y"));
    }
    if !(x_bar > 0.0) {
        return Err(Error::NonPositive("x_bar"));
    }
    if !(y_bar > 0.0) {
        return Err(Error::NonPositive("y_bar"));
    }
    let ratio = x_bar / y_bar;
    let bracket = 2.0 * (x / x_bar).sqrt() - (x + y) / (x_bar + y_bar) - 1.0;
    Ok(ratio.ln_1p() * LOG2_E + LOG2_E * ratio * bracket)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth(x: f64, y: f64) -> f64 {
        (x / y).ln_1p() * LOG2_E
    }

    #[test]
    fn tight_at_expansion_point() {
        for (x, y) in [(1.0, 1.0), (4.0, 0.5), (1e-12, 3e-13), (7e3, 2.0)] {
            let b = ratio_log_bound(x, y, x, y).unwrap();
            assert!((b - truth(x, y)).abs() <= 1e-14 * truth(x, y).max(1.0));
        }
    }

    #[test]
    fn hand_case() {
        let b = ratio_log_bound(1.0, 1.0, 4.0, 1.0).unwrap();
        let expected = (5f64.ln() - 1.6) / 2f64.ln();
        assert!((b - expected).abs() < 1e-15);
        assert!(b <= 1.0);
    }

    #[test]
    fn natural_log_coefficient_is_not_a_minorizer() {
        // log2 first term with a natural-log slope is too flat, so it crosses
        // the true curve just left of the expansion point.
        let printed = |x: f64, y: f64, xb: f64, yb: f64| {
            (xb / yb).ln_1p() * LOG2_E + (xb / yb) * (2.0 * (x / xb).sqrt() - (x + y) / (xb + yb) - 1.0)
        };
        let (xb, yb) = (1.0, 1.0);
        let x = 0.9;
        assert!(printed(x, yb, xb, yb) > truth(x, yb));
        assert!(ratio_log_bound(x, yb, xb, yb).unwrap() <= truth(x, yb));
    }

    #[test]
    fn random_quadruples_stay_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draw = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-4.0..4.0));
        for _ in 0..100_000 {
            let (x, y, xb, yb) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
            let slack = truth(x, y) - ratio_log_bound(x, y, xb, yb).unwrap();
            assert!(slack >= -1e-12 * truth(x, y).max(1.0), "{x} {y} {xb} {yb}: {slack}");
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ratio_log_bound(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ratio_log_bound(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(ratio_log_bound(1.0, 1.0, f64::NAN, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn bound_is_concave_along_segments(
            xb in 0.01f64..100.0, yb in 0.01f64..100.0,
            x0 in 0.01f64..100.0, y0 in 0.01f64..100.0,
            x1 in 0.01f64..100.0, y1 in 0.01f64..100.0,
        ) {
            let f = |x: f64, y: f64| ratio_log_bound(x, y, xb, yb).unwrap();
            let mid = f(0.5 * (x0 + x1), 0.5 * (y0 + y1));
            prop_assert!(mid >= 0.5 * (f(x0, y0) + f(x1, y1)) - 1e-10 * mid.abs().max(1.0));
        }
    }
}
