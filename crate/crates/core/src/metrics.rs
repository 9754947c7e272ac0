//! Regression error metrics.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Actuals with magnitude below this are left out of MAPE.
pub const MAPE_ZERO_THRESHOLD: f64 = 1e-6;

fn check<T>(pred: &[T], actual: &[T]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

pub fn mae<T: Scalar>(pred: &[T], actual: &[T]) -> Result<T> {
    check(pred, actual)?;
    let sum = pred
        .iter()
        .zip(actual)
        .fold(T::zero(), |acc, (&p, &a)| acc + (p - a).abs());
    Ok(sum / T::of_usize(pred.len()))
}

/// Mean absolute percentage error as a fraction, with the number of samples
/// skipped because their actual value is ~0.
pub fn mape<T: Scalar>(pred: &[T], actual: &[T]) -> Result<(T, usize)> {
    check(pred, actual)?;
    let cut = T::of(MAPE_ZERO_THRESHOLD);
    let mut sum = T::zero();
    let mut used = 0usize;
    for (&p, &a) in pred.iter().zip(actual) {
        if a.abs() < cut {
            continue;
        }
        sum = sum + (p - a).abs() / a.abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllExcluded);
    }
    Ok((sum / T::of_usize(used), pred.len() - used))
}

pub fn rmse<T: Scalar>(pred: &[T], actual: &[T]) -> Result<T> {
    check(pred, actual)?;
    let sum = pred.iter().zip(actual).fold(T::zero(), |acc, (&p, &a)| {
        let d = p - a;
        acc + d * d
    });
    Ok((sum / T::of_usize(pred.len())).sqrt())
}
