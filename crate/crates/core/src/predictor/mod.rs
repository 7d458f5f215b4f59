//! Forecasting the next interval's ECE count with a stacked LSTM.

mod error;
mod lstm;
mod metrics;
mod series;
mod train;
mod windows;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use error::{PredictorError, Result};
pub use lstm::{BackwardScratch, ForwardCache, LstmConfig, LstmModel};
pub use metrics::{mae, rmse};
pub use series::{ingest_trace, parse_trace, synth_trace, EceSeries, SynthParams};
pub use train::{evaluate, train, Adam, FitReport, BATCH_SIZE, TRAIN_SPLIT};
pub use windows::{build_windows, neurons_per_layer, train_rows, Normalizer, SupervisedWindows};

use crate::num::Scalar;
use crate::simnet::{stream, SimRng};

const CHECKPOINT_FORMAT: &str = "iaqm-lstm-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// A model together with its input scaling and optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor<T> {
    pub model: LstmModel<T>,
    pub normalizer: Normalizer,
    pub optimizer: Adam<T>,
}

/// Normalized windows of a series with the chronological split point.
pub struct PreparedSeries<T> {
    pub windows: SupervisedWindows<T>,
    pub n_train: usize,
    pub normalizer: Normalizer,
}

/// Fits the normalizer on the samples covered by the training rows and
/// windows the whole normalized series.
pub fn prepare<T: Scalar>(series: &EceSeries, steps: usize, split: f64) -> Result<PreparedSeries<T>> {
    let values = series.values();
    if values.len() < steps + 1 {
        return Err(PredictorError::EmptyWindows { len: values.len(), steps });
    }
    let rows = values.len() - steps;
    let n_train = train_rows(rows, split).max(1);
    let normalizer = Normalizer::fit(&values[..n_train + steps]);
    let scaled: Vec<T> = values.iter().map(|&v| T::lit(normalizer.normalize(v))).collect();
    Ok(PreparedSeries {
        windows: build_windows(&scaled, steps)?,
        n_train,
        normalizer,
    })
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    scalar: String,
    config: LstmConfig,
    normalizer: Normalizer,
    params: Vec<f64>,
    adam_lr: f64,
    adam_beta1: f64,
    adam_beta2: f64,
    adam_eps: f64,
    adam_t: u64,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
}

fn to_f64s<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn from_f64s<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl<T: Scalar> Predictor<T> {
    pub fn new(cfg: LstmConfig, seed: u64) -> Result<Self> {
        let model = LstmModel::init(cfg, &mut stream(seed, "predictor-init"))?;
        let n = model.params().len();
        Ok(Predictor {
            model,
            normalizer: Normalizer { min: 0.0, max: 1.0 },
            optimizer: Adam::new(n),
        })
    }

    /// Trains for `epochs` passes on the first 80% of the series and scores
    /// both parts.
    pub fn fit(&mut self, series: &EceSeries, epochs: usize, rng: &mut SimRng) -> Result<FitReport> {
        let prep = prepare::<T>(series, self.model.config().steps, TRAIN_SPLIT)?;
        self.normalizer = prep.normalizer;
        train(&mut self.model, &mut self.optimizer, &prep.windows, prep.n_train, epochs, rng)
    }

    /// One pass over fresh data, starting from the current weights. Returns
    /// the report before and after the update.
    pub fn retrain_one_epoch(&mut self, series: &EceSeries, rng: &mut SimRng) -> Result<(FitReport, FitReport)> {
        if series.is_empty() {
            return Err(PredictorError::EmptyWindows { len: 0, steps: self.model.config().steps });
        }
        let prep = prepare::<T>(series, self.model.config().steps, TRAIN_SPLIT)?;
        let before = evaluate(&self.model, &prep.windows, prep.n_train)?;
        self.normalizer = prep.normalizer;
        let after = train(&mut self.model, &mut self.optimizer, &prep.windows, prep.n_train, 1, rng)?;
        Ok((before, after))
    }

    /// Scores the current weights on a series (normalizer refitted on its
    /// training part, as in [`Self::fit`]), without training.
    pub fn score(&self, series: &EceSeries) -> Result<FitReport> {
        let prep = prepare::<T>(series, self.model.config().steps, TRAIN_SPLIT)?;
        evaluate(&self.model, &prep.windows, prep.n_train)
    }

    /// Forecast of the next raw count from the last `steps` raw counts.
    pub fn predict_next(&self, recent: &[f64]) -> f64 {
        let steps = self.model.config().steps;
        assert!(recent.len() >= steps, "need {steps} recent values");
        let w: Vec<T> = recent[recent.len() - steps..]
            .iter()
            .map(|&v| T::lit(self.normalizer.normalize(v)))
            .collect();
        self.normalizer.denormalize(self.model.forward(&w).to_f64_lossy())
    }

    pub fn to_json(&self) -> String {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scalar: std::any::type_name::<T>().into(),
            config: *self.model.config(),
            normalizer: self.normalizer,
            params: to_f64s(self.model.params()),
            adam_lr: self.optimizer.lr,
            adam_beta1: self.optimizer.beta1,
            adam_beta2: self.optimizer.beta2,
            adam_eps: self.optimizer.eps,
            adam_t: self.optimizer.t,
            adam_m: to_f64s(&self.optimizer.m),
            adam_v: to_f64s(&self.optimizer.v),
        };
        serde_json::to_string_pretty(&ck).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| PredictorError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(PredictorError::Checkpoint(format!(
                "unsupported format {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.scalar != std::any::type_name::<T>() {
            return Err(PredictorError::Checkpoint(format!(
                "checkpoint holds {} weights, expected {}",
                ck.scalar,
                std::any::type_name::<T>()
            )));
        }
        let model = LstmModel::from_params(ck.config, from_f64s(&ck.params))?;
        let n = model.params().len();
        if ck.adam_m.len() != n || ck.adam_v.len() != n {
            return Err(PredictorError::Checkpoint("optimizer state size mismatch".into()));
        }
        Ok(Predictor {
            model,
            normalizer: ck.normalizer,
            optimizer: Adam {
                lr: ck.adam_lr,
                beta1: ck.adam_beta1,
                beta2: ck.adam_beta2,
                eps: ck.adam_eps,
                m: from_f64s(&ck.adam_m),
                v: from_f64s(&ck.adam_v),
                t: ck.adam_t,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
