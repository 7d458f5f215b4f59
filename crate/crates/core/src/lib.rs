//! Discrete-event network simulator with an ECN-driven learning AQM tuner.
//!
//! The simulator ([`simnet`], [`transport`], [`aqm`]) runs in integer
//! nanoseconds. The learning side ([`predictor`], [`tuner`]) is generic over
//! the float type; the aliases below pick the usual instantiations.

pub mod aqm;
pub mod harness;
pub mod num;
pub mod predictor;
pub mod simnet;
pub mod transport;
pub mod tuner;

/// Double-precision LSTM.
pub type Lstm = predictor::LstmModel<f64>;
/// Single-precision LSTM.
pub type LstmF32 = predictor::LstmModel<f32>;
pub type PredictorF64 = predictor::Predictor<f64>;
pub type PredictorF32 = predictor::Predictor<f32>;
pub type QTableF64 = tuner::QTable<f64>;
pub type AgentF64 = tuner::Agent<f64>;
