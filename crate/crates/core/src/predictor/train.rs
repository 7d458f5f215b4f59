use serde::{Deserialize, Serialize};

use super::error::{PredictorError, Result};
use super::lstm::{BackwardScratch, ForwardCache, LstmModel};
use super::metrics::{mae, rmse};
use super::windows::SupervisedWindows;
use crate::num::Scalar;
use crate::simnet::SimRng;

pub const BATCH_SIZE: usize = 64;
pub const TRAIN_SPLIT: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize) -> Self {
        Adam {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let b1 = T::lit(self.beta1);
        let b2 = T::lit(self.beta2);
        let c1 = T::lit(1.0 - self.beta1.powi(self.t as i32));
        let c2 = T::lit(1.0 - self.beta2.powi(self.t as i32));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = b1 * self.m[k] + (T::one() - b1) * g;
            self.v[k] = b2 * self.v[k] + (T::one() - b2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            params[k] -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Errors in normalized units on the chronological train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub rmse_train: f64,
    pub rmse_test: f64,
    pub mae_train: f64,
    pub mae_test: f64,
    pub epochs: usize,
    pub split: f64,
    /// Training windows processed across all epochs.
    pub windows_seen: usize,
    /// Mean training loss (with dropout) of the last epoch.
    pub final_loss: f64,
}

fn errors<T: Scalar>(model: &LstmModel<T>, w: &SupervisedWindows<T>, rows: std::ops::Range<usize>) -> Result<(f64, f64)> {
    if rows.is_empty() {
        return Ok((0.0, 0.0));
    }
    let windows: Vec<&[T]> = rows.clone().map(|r| w.row(r)).collect();
    let pred = model.predict_many(&windows);
    let actual = &w.y[rows];
    Ok((rmse(actual, &pred)?.to_f64_lossy(), mae(actual, &pred)?.to_f64_lossy()))
}

/// Scores the model on rows `[0, n_train)` and `[n_train, rows)`.
pub fn evaluate<T: Scalar>(model: &LstmModel<T>, w: &SupervisedWindows<T>, n_train: usize) -> Result<FitReport> {
    let (rmse_train, mae_train) = errors(model, w, 0..n_train)?;
    let (rmse_test, mae_test) = errors(model, w, n_train..w.rows())?;
    Ok(FitReport {
        rmse_train,
        rmse_test,
        mae_train,
        mae_test,
        epochs: 0,
        split: n_train as f64 / w.rows() as f64,
        windows_seen: 0,
        final_loss: f64::NAN,
    })
}

/// Mini-batch BPTT on the first `n_train` rows, in order, for `epochs`
/// passes. Dropout masks are drawn per window per pass from `rng`.
pub fn train<T: Scalar>(
    model: &mut LstmModel<T>,
    opt: &mut Adam<T>,
    w: &SupervisedWindows<T>,
    n_train: usize,
    epochs: usize,
    rng: &mut SimRng,
) -> Result<FitReport> {
    if n_train == 0 || n_train > w.rows() {
        return Err(PredictorError::InvalidArgument(format!(
            "need 1..={} training rows, got {n_train}",
            w.rows()
        )));
    }
    if opt.m.len() != model.params().len() {
        return Err(PredictorError::LengthMismatch(opt.m.len(), model.params().len()));
    }
    let n = model.params().len();
    let mut grad = vec![T::zero(); n];
    let mut cache = ForwardCache::default();
    let mut scratch = BackwardScratch::default();
    let mut dy = Vec::with_capacity(BATCH_SIZE);
    let mut seen = 0;
    let mut final_loss = f64::NAN;
    for epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        for (batch, start) in (0..n_train).step_by(BATCH_SIZE).enumerate() {
            let end = (start + BATCH_SIZE).min(n_train);
            let scale = T::lit(2.0 / (end - start) as f64);
            grad.fill(T::zero());
            let rows: Vec<&[T]> = (start..end).map(|r| w.row(r)).collect();
            model.sample_masks(&mut cache, rows.len(), rng);
            model.forward_batch(&rows, &mut cache);
            let mut batch_loss = 0.0;
            dy.clear();
            for (k, r) in (start..end).enumerate() {
                let err = cache.outputs[k] - w.y[r];
                batch_loss += (err * err).to_f64_lossy();
                dy.push(scale * err);
            }
            model.backward_batch(&cache, &dy, &mut grad, &mut scratch);
            if !batch_loss.is_finite() {
                return Err(PredictorError::Divergence { epoch, batch });
            }
            opt.step(model.params_mut(), &grad);
            epoch_loss += batch_loss;
            seen += end - start;
        }
        final_loss = epoch_loss / n_train as f64;
    }
    let mut report = evaluate(model, w, n_train)?;
    report.epochs = epochs;
    report.windows_seen = seen;
    report.final_loss = final_loss;
    Ok(report)
}
