use super::error::{PredictorError, Result};
use crate::num::Scalar;

fn check<T>(a: &[T], p: &[T]) -> Result<()> {
    if a.len() != p.len() {
        return Err(PredictorError::LengthMismatch(a.len(), p.len()));
    }
    if a.is_empty() {
        return Err(PredictorError::InvalidArgument("empty error vectors".into()));
    }
    Ok(())
}

pub fn rmse<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check(actual, predicted)?;
    let sum = actual
        .iter()
        .zip(predicted)
        .fold(T::zero(), |acc, (&a, &p)| acc + (a - p) * (a - p));
    Ok((sum / T::lit(actual.len() as f64)).sqrt())
}

pub fn mae<T: Scalar>(actual: &[T], predicted: &[T]) -> Result<T> {
    check(actual, predicted)?;
    let sum = actual.iter().zip(predicted).fold(T::zero(), |acc, (&a, &p)| acc + (a - p).abs());
    Ok(sum / T::lit(actual.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 1.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!((rmse(&[0.08], &[0.0]).unwrap() - 0.08f64).abs() < 1e-15);
        assert!((mae(&[0.08f32], &[0.0]).unwrap() - 0.08).abs() < 1e-7);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
