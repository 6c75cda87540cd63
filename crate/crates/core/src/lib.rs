//! Sequential ensemble conformal prediction intervals for dynamic time series.
//!
//! The crate wraps any regression algorithm in a bootstrap ensemble, builds
//! leave-one-out residuals from the out-of-bag members, and then emits one
//! prediction interval per test step while a fixed-length residual window
//! slides forward as responses are revealed.
//!
//! Alongside the main procedure it ships:
//! - the split-conformal baselines ([`baselines`]) run in the same sliding regime,
//! - seeded simulators for the three benchmark processes ([`datagen`]),
//! - scoring and experiment aggregation ([`eval`]).
//!
//! Heavy loops (ensemble members, trials) go through [`par::Execution`]; with
//! the `parallel` feature disabled everything runs on the calling thread and
//! produces bit-identical output.

pub mod baselines;
pub mod dataset;
pub mod datagen;
pub mod enpi;
pub mod error;
pub mod eval;
pub mod interval;
pub mod par;
pub mod quantile;
pub mod regressors;
pub mod rng;

pub use baselines::{Method, WeightScheme};
pub use datagen::{SimConfig, SimKind};
pub use dataset::Dataset;
pub use enpi::{Aggregation, CenterMode, EnsembleConfig, EnsembleState, SequentialRun};
pub use error::{Error, Result};
pub use eval::{DataSource, EvalRecord, ExperimentReport};
pub use interval::{PredictionInterval, ResidualWindow};
pub use par::Execution;
pub use regressors::{FittedModel, Learner, Predictor, RegressorFamily, RegressorSpec};
