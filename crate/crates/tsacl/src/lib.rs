//! Class-incremental learning for multivariate time series without
//! gradients: a frozen convolutional encoder, a random nonlinear feature
//! expansion, and a ridge-regression classifier updated recursively in
//! closed form so that the model after task t equals the model trained
//! jointly on all tasks seen so far.

pub mod classifier;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod exec;
pub mod expansion;
pub mod linalg;
pub mod runner;

pub use error::{Error, Result};
