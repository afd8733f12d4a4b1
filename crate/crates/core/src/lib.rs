//! Machine-unlearning workbench.
//!
//! Trains small fully connected classifiers with plain SGD while recording
//! every batch update, removes a forget set with one of three algorithms
//! ([`unlearn::retrain`], [`unlearn::amnesiac_forget`],
//! [`unlearn::fisher_forget`]), and scores the result with the
//! Fisher-information efficacy metric, its gradient-norm upper bound,
//! accuracies, and a black-box membership inference attack.

pub mod attack;
pub mod data;
pub mod error;
pub mod format;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod unlearn;
pub mod update_log;

pub use error::{Error, Result};
pub use metrics::{EfficacyReport, FimDiagonal};
pub use nn::{Architecture, GradientVector, Model, Sample, TrainConfig};
pub use unlearn::FisherConfig;
pub use update_log::{UpdateLog, UpdateLogWriter, UpdateRecord};
