//! Log-scaled squared error.
//!
//! `l(e) = alpha^2 * ln(1 + (e / alpha)^2)` behaves like `e^2` for
//! `|e| << alpha` and grows only logarithmically beyond it, so large
//! residuals do not drag the fit toward the target mean.

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA_DB: f64 = 5.0;

#[inline]
pub fn msle_term(e: f64, alpha: f64) -> f64 {
    let u = e / alpha;
    alpha * alpha * (u * u).ln_1p()
}

/// d l(e) / d e.
#[inline]
pub fn msle_term_grad(e: f64, alpha: f64) -> f64 {
    let u = e / alpha;
    2.0 * e / (1.0 + u * u)
}

pub fn msle_loss(predictions: &[f64], targets: &[f64], alpha: f64) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("loss over an empty batch"));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("loss alpha must be > 0, got {alpha}")));
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| msle_term(p - t, alpha))
        .sum();
    Ok(sum / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(msle_loss(&[1.0, 2.0], &[1.0, 2.0], 5.0).unwrap(), 0.0);
        let small = msle_loss(&[0.1], &[0.0], 5.0).unwrap();
        assert!((small - 25.0 * 1.0004f64.ln()).abs() < 1e-12);
        assert!((small - 0.0099980).abs() < 1e-7);
        let big = msle_loss(&[5.0], &[0.0], 5.0).unwrap();
        assert!((big - 25.0 * 2f64.ln()).abs() < 1e-12);
        assert!((big - 17.329).abs() < 1e-3);
        assert_eq!(msle_term_grad(5.0, 5.0), 5.0);
    }

    #[test]
    fn errors() {
        assert!(msle_loss(&[], &[], 5.0).is_err());
        assert!(msle_loss(&[1.0], &[1.0, 2.0], 5.0).is_err());
        assert!(msle_loss(&[1.0], &[1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn bounded_by_mse_and_symmetric(es in prop::collection::vec(-200.0..200.0f64, 1..50), alpha in 0.1..20.0f64) {
            let zeros = vec![0.0; es.len()];
            let neg: Vec<f64> = es.iter().map(|e| -e).collect();
            let l = msle_loss(&es, &zeros, alpha).unwrap();
            let mse = es.iter().map(|e| e * e).sum::<f64>() / es.len() as f64;
            prop_assert!(l >= 0.0);
            prop_assert!(l <= mse * (1.0 + 1e-12));
            prop_assert_eq!(l, msle_loss(&neg, &zeros, alpha).unwrap());
            if es.iter().any(|&e| e != 0.0) {
                prop_assert!(l > 0.0);
            }
        }

        #[test]
        fn grad_matches_difference(e in -100.0..100.0f64, alpha in 0.5..10.0f64) {
            let h = 1e-5;
            let fd = (msle_term(e + h, alpha) - msle_term(e - h, alpha)) / (2.0 * h);
            let g = msle_term_grad(e, alpha);
            prop_assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()));
        }
    }
}
