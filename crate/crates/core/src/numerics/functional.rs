//! Scalar helpers shared by the tape and the forward-only inference path.

use std::f64::consts::LN_2;

/// Bounds applied to probabilities before taking logs.
pub const PROB_CLAMP: (f64, f64) = (1e-7, 1.0 - 1e-7);

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP.0, PROB_CLAMP.1)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln p + (1-y) ln(1-p)]` on the clamped probability.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = clamp_prob(p);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Binary entropy in nats with `0 ln 0 = 0`. Range `[0, ln 2]`.
pub fn entropy_binary(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    (term(p) + term(1.0 - p)).min(LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bce_examples() {
        assert!((bce(0.5, 1.0) - LN_2).abs() < 1e-15);
        let near = bce(1.0 - 1e-7, 1.0);
        assert!(near > 0.0 && near < 2e-7);
        assert!((bce(0.9, 0.0) - 10f64.ln()).abs() < 1e-12);
        assert!((bce(0.9, 0.0) - 2.302585).abs() < 1e-6);
        // fully confident prediction is clamped, not infinite
        assert!(bce(0.0, 1.0).is_finite());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_binary(0.5), LN_2);
        assert_eq!(entropy_binary(0.0), 0.0);
        assert_eq!(entropy_binary(1.0), 0.0);
        assert!((entropy_binary(0.9) - 0.325083).abs() < 1e-6);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric_and_bounded(p in 0.0f64..=1.0) {
            let h = entropy_binary(p);
            prop_assert!((0.0..=LN_2).contains(&h));
            prop_assert!((h - entropy_binary(1.0 - p)).abs() < 1e-12);
        }

        #[test]
        fn bce_is_non_negative(p in 0.0f64..=1.0, y in 0u8..=1) {
            prop_assert!(bce(p, y as f64) >= 0.0);
        }
    }
}
