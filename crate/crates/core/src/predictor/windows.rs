use serde::{Deserialize, Serialize};

use super::error::{PredictorError, Result};

/// Sliding-window supervised dataset: row `r` holds
/// `series[r..r + steps]` and its label is `series[r + steps]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupervisedWindows<T> {
    pub steps: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Copy> SupervisedWindows<T> {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.x[r * self.steps..(r + 1) * self.steps]
    }
}

pub fn build_windows<T: Copy>(series: &[T], steps: usize) -> Result<SupervisedWindows<T>> {
    if steps == 0 || series.len() < steps + 1 {
        return Err(PredictorError::EmptyWindows { len: series.len(), steps });
    }
    let rows = series.len() - steps;
    let mut x = Vec::with_capacity(rows * steps);
    for r in 0..rows {
        x.extend_from_slice(&series[r..r + steps]);
    }
    Ok(SupervisedWindows {
        steps,
        x,
        y: series[steps..].to_vec(),
    })
}

/// Number of training rows for a chronological split.
pub fn train_rows(rows: usize, split: f64) -> usize {
    ((rows as f64 * split).round() as usize).min(rows)
}

/// Min-max scaling with bounds fitted on training data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Normalizer {
    pub fn fit(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            Normalizer { min: 0.0, max: 0.0 }
        } else {
            Normalizer { min, max }
        }
    }

    fn degenerate(&self) -> bool {
        self.max <= self.min
    }

    /// Values outside the fitted range map outside `[0, 1]`; no clipping.
    pub fn normalize(&self, v: f64) -> f64 {
        if self.degenerate() {
            0.0
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.degenerate() {
            self.min
        } else {
            v * (self.max - self.min) + self.min
        }
    }

    pub fn normalize_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.normalize(v)).collect()
    }
}

pub fn neurons_per_layer(n_in: usize, n_samples: usize, n_layers: usize) -> Result<usize> {
    if n_in == 0 || n_samples == 0 || n_layers == 0 {
        return Err(PredictorError::InvalidArgument(
            "neurons_per_layer arguments must be >= 1".into(),
        ));
    }
    Ok(((n_in as f64 + (n_samples as f64).sqrt()) / n_layers as f64).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizing_examples() {
        assert_eq!(neurons_per_layer(10, 6000, 3).unwrap(), 30);
        assert_eq!(neurons_per_layer(1, 1, 1).unwrap(), 2);
        assert_eq!(neurons_per_layer(10, 100, 2).unwrap(), 10);
        assert!(neurons_per_layer(0, 1, 1).is_err());
    }

    #[test]
    fn window_examples() {
        let s: Vec<f64> = (0..11).map(f64::from).collect();
        let w = build_windows(&s, 10).unwrap();
        assert_eq!(w.rows(), 1);
        assert_eq!(w.row(0), &s[..10]);
        assert_eq!(w.y, vec![10.0]);
        let w = build_windows(&(0..12).map(f64::from).collect::<Vec<_>>(), 10).unwrap();
        assert_eq!((w.rows(), w.y.len()), (2, 2));
        assert!(matches!(
            build_windows(&[0.0; 10], 10),
            Err(PredictorError::EmptyWindows { len: 10, steps: 10 })
        ));
    }

    #[test]
    fn normalizer_examples() {
        let n = Normalizer::fit(&[0.0, 5.0, 10.0]);
        assert_eq!(n.normalize_all(&[0.0, 5.0, 10.0]), vec![0.0, 0.5, 1.0]);
        let c = Normalizer::fit(&[4.0, 4.0, 4.0]);
        assert_eq!(c.normalize_all(&[4.0, 4.0, 4.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(n.normalize(20.0), 2.0);
    }

    proptest! {
        #[test]
        fn shifting_a_window_consumes_one_sample(s in prop::collection::vec(0u32..100, 11..60)) {
            let w = build_windows(&s, 10).unwrap();
            for r in 0..w.rows() - 1 {
                prop_assert_eq!(&w.row(r)[1..], &w.row(r + 1)[..9]);
                prop_assert_eq!(w.row(r + 1)[9], s[r + 10]);
            }
        }

        #[test]
        fn normalize_round_trips(v in prop::collection::vec(0.0f64..1e6, 2..50)) {
            let n = Normalizer::fit(&v);
            for &x in &v {
                let back = n.denormalize(n.normalize(x));
                if n.max > n.min {
                    prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
                }
            }
        }
    }
}
