//! The sequential ensemble prediction-interval procedure.
//!
//! 1. Draw the ensemble size `B ~ Binomial(b_tilde, 1/e)`.
//! 2. Fit `B` base models on bootstrap resamples of the `T` training rows.
//! 3. For each training row `i`, aggregate the members whose resample left
//!    `i` out and record the absolute leave-one-out residual.
//! 4. For each test row, center the interval at the `1 - alpha` quantile of
//!    the `T` leave-one-out predictions at `x_t` and use the `1 - alpha`
//!    quantile of the residual window as the half-width. Once `y_t` is
//!    revealed, its residual replaces the oldest entry of the window.
//!
//! The ensemble is fit once; nothing is refit during the test period.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::EvalRecord;
use crate::interval::{check_alpha, PredictionInterval, ResidualWindow};
use crate::par::Execution;
use crate::quantile::empirical_quantile;
use crate::regressors::{Learner, Predictor};
use crate::rng::{derive_seed, rng_from_seed};

/// Aggregation applied to member predictions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    /// Drops the `floor(trim * m)` smallest and largest of `m` values.
    TrimmedMean(f64),
}

pub const DEFAULT_TRIM: f64 = 0.1;

impl Aggregation {
    pub fn validate(self) -> Result<()> {
        match self {
            Aggregation::TrimmedMean(g) if !(0.0..0.5).contains(&g) => {
                Err(Error::InvalidArgument(format!("trim fraction {g} outside [0, 0.5)")))
            }
            _ => Ok(()),
        }
    }

    /// Aggregates a non-empty slice. May reorder `values`.
    pub fn apply(self, values: &mut [f64]) -> f64 {
        debug_assert!(!values.is_empty());
        let m = values.len();
        match self {
            Aggregation::Mean => values.iter().sum::<f64>() / m as f64,
            Aggregation::Median => {
                values.sort_by(f64::total_cmp);
                if m % 2 == 1 {
                    values[m / 2]
                } else {
                    (values[m / 2 - 1] + values[m / 2]) / 2.0
                }
            }
            Aggregation::TrimmedMean(trim) => {
                values.sort_by(f64::total_cmp);
                let cut = (trim * m as f64).floor() as usize;
                let kept = &values[cut..m - cut];
                kept.iter().sum::<f64>() / kept.len() as f64
            }
        }
    }
}

/// Where to center each test interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    /// `1 - alpha` quantile of the leave-one-out predictions at `x_t`.
    #[default]
    LooQuantile,
    /// Plain mean of the leave-one-out predictions at `x_t`.
    LooMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub b_tilde: usize,
    pub phi: Aggregation,
    pub center: CenterMode,
    pub execution: Execution,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            b_tilde: 100,
            phi: Aggregation::Mean,
            center: CenterMode::LooQuantile,
            execution: Execution::Parallel,
        }
    }
}

/// Draws `B ~ Binomial(b_tilde, 1/e)` as a sum of Bernoulli trials, redrawing
/// on `B = 0`.
pub fn draw_ensemble_size<R: Rng + ?Sized>(b_tilde: usize, rng: &mut R) -> Result<usize> {
    if b_tilde < 3 {
        return Err(Error::InvalidArgument(format!(
            "b_tilde = {b_tilde}; need b_tilde / e > 1"
        )));
    }
    let p = (-1.0f64).exp();
    loop {
        let b = (0..b_tilde).filter(|_| rng.random::<f64>() < p).count();
        if b > 0 {
            return Ok(b);
        }
    }
}

/// Bootstrap ensemble with the bookkeeping needed for leave-one-out
/// aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState<M> {
    models: Vec<M>,
    index_sets: Vec<Vec<usize>>,
    /// `excluding[i]` lists the members whose resample does not contain `i`.
    excluding: Vec<Vec<usize>>,
    phi: Aggregation,
    train_len: usize,
}

impl<M: Predictor> EnsembleState<M> {
    /// Assembles an ensemble from already fitted members and their resamples
    /// (0-based training indices).
    pub fn from_parts(models: Vec<M>, index_sets: Vec<Vec<usize>>, phi: Aggregation, train_len: usize) -> Result<Self> {
        phi.validate()?;
        if models.is_empty() || models.len() != index_sets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} models for {} index sets",
                models.len(),
                index_sets.len()
            )));
        }
        let mut excluding = vec![Vec::new(); train_len];
        for (b, set) in index_sets.iter().enumerate() {
            let mut in_bag = vec![false; train_len];
            for &i in set {
                if i >= train_len {
                    return Err(Error::InvalidArgument(format!("index {i} outside training range")));
                }
                in_bag[i] = true;
            }
            for (i, inside) in in_bag.into_iter().enumerate() {
                if !inside {
                    excluding[i].push(b);
                }
            }
        }
        Ok(Self {
            models,
            index_sets,
            excluding,
            phi,
            train_len,
        })
    }

    pub fn models(&self) -> &[M] {
        &self.models
    }

    pub fn index_sets(&self) -> &[Vec<usize>] {
        &self.index_sets
    }

    pub fn size(&self) -> usize {
        self.models.len()
    }

    pub fn phi(&self) -> Aggregation {
        self.phi
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }

    /// Members that left training row `i` out of their resample.
    pub fn excluding(&self, i: usize) -> &[usize] {
        &self.excluding[i]
    }

    /// Training rows that every member saw; these fall back to the full ensemble.
    pub fn fallback_count(&self) -> usize {
        self.excluding.iter().filter(|e| e.is_empty()).count()
    }

    pub fn member_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.predict(x)).collect()
    }

    /// Aggregate of all members.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut preds = self.member_predictions(x)?;
        Ok(self.phi.apply(&mut preds))
    }

    fn loo_from_members(&self, i: usize, member_preds: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        let excluding = &self.excluding[i];
        if excluding.is_empty() {
            scratch.extend_from_slice(member_preds);
        } else {
            scratch.extend(excluding.iter().map(|&b| member_preds[b]));
        }
        self.phi.apply(scratch)
    }

    /// Aggregate, at `x`, of the members whose resample excludes row `i`.
    pub fn loo_predict(&self, i: usize, x: &[f64]) -> Result<f64> {
        if i >= self.train_len {
            return Err(Error::InvalidArgument(format!(
                "training index {i} outside 0..{}",
                self.train_len
            )));
        }
        let preds = self.member_predictions(x)?;
        Ok(self.loo_from_members(i, &preds, &mut Vec::new()))
    }

    /// All `T` leave-one-out aggregates at the same point `x`.
    pub fn loo_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        let preds = self.member_predictions(x)?;
        let mut scratch = Vec::with_capacity(self.models.len());
        Ok((0..self.train_len)
            .map(|i| self.loo_from_members(i, &preds, &mut scratch))
            .collect())
    }
}

/// Draws `B`, the `B` bootstrap resamples and fits one member per resample.
///
/// Draw order from the root seed: `B`, then resamples `1..B`; member `b` is
/// fit with `derive_seed(seed, b)`, so the result does not depend on how the
/// fits are scheduled.
pub fn fit_ensemble<L: Learner>(
    data: &Dataset,
    learner: &L,
    config: &EnsembleConfig,
    seed: u64,
) -> Result<EnsembleState<L::Model>> {
    let t = data.train_len();
    if t < 2 {
        return Err(Error::InsufficientData(format!("{t} training rows, need at least 2")));
    }
    config.phi.validate()?;
    let mut rng = rng_from_seed(seed);
    let b = draw_ensemble_size(config.b_tilde, &mut rng)?;
    let index_sets: Vec<Vec<usize>> = (0..b)
        .map(|_| (0..t).map(|_| rng.random_range(0..t)).collect())
        .collect();
    let models = config.execution.try_map_range(b, |k| {
        let (x, y) = data.gather(&index_sets[k]);
        learner.fit(&x, &y, derive_seed(seed, k as u64))
    })?;
    EnsembleState::from_parts(models, index_sets, config.phi, t)
}

/// Leave-one-out absolute residuals of the training rows, in row order.
pub fn init_residuals<M: Predictor>(ensemble: &EnsembleState<M>, data: &Dataset) -> Result<ResidualWindow> {
    if data.train_len() != ensemble.train_len() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.train_len(),
            got: data.train_len(),
        });
    }
    let residuals = (0..ensemble.train_len())
        .map(|i| Ok((data.y(i) - ensemble.loo_predict(i, data.row(i))?).abs()))
        .collect::<Result<Vec<f64>>>()?;
    ResidualWindow::from_residuals(residuals)
}

fn interval_from_loo(loo: &[f64], window: &ResidualWindow, alpha: f64, center: CenterMode) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    if !window.is_full() {
        return Err(Error::Sequence(format!(
            "residual window holds {} of {} values",
            window.len(),
            window.capacity()
        )));
    }
    let c = match center {
        CenterMode::LooQuantile => empirical_quantile(loo, 1.0 - alpha)?,
        CenterMode::LooMean => loo.iter().sum::<f64>() / loo.len() as f64,
    };
    let w = window.quantile(1.0 - alpha)?;
    PredictionInterval::new(c, w, alpha)
}

/// Interval for the next test point from the current window.
pub fn predict_next_interval<M: Predictor>(
    ensemble: &EnsembleState<M>,
    window: &ResidualWindow,
    x_t: &[f64],
    alpha: f64,
    center: CenterMode,
) -> Result<PredictionInterval> {
    interval_from_loo(&ensemble.loo_predictions(x_t)?, window, alpha, center)
}

/// State of one sequential pass over a test period.
///
/// Calls must alternate: [`predict_next`](Self::predict_next) for step `t`,
/// then [`ingest_observation`](Self::ingest_observation) with `y_t`.
#[derive(Debug, Clone)]
pub struct SequentialRun<M> {
    ensemble: EnsembleState<M>,
    window: ResidualWindow,
    alpha: f64,
    center: CenterMode,
    intervals: Vec<PredictionInterval>,
    pending: Option<PredictionInterval>,
    loo_cache: Vec<f64>,
    p_values: Vec<f64>,
}

impl<M: Predictor> SequentialRun<M> {
    /// Builds the initial residual window from the training segment of `data`.
    pub fn start(ensemble: EnsembleState<M>, data: &Dataset, alpha: f64, center: CenterMode) -> Result<Self> {
        check_alpha(alpha)?;
        let window = init_residuals(&ensemble, data)?;
        Ok(Self {
            ensemble,
            window,
            alpha,
            center,
            intervals: Vec::new(),
            pending: None,
            loo_cache: Vec::new(),
            p_values: Vec::new(),
        })
    }

    pub fn predict_next(&mut self, x_t: &[f64]) -> Result<PredictionInterval> {
        if self.pending.is_some() {
            return Err(Error::Sequence("previous observation not yet ingested".into()));
        }
        self.loo_cache = self.ensemble.loo_predictions(x_t)?;
        let interval = interval_from_loo(&self.loo_cache, &self.window, self.alpha, self.center)?;
        self.pending = Some(interval);
        self.intervals.push(interval);
        Ok(interval)
    }

    /// Slides the window with `|y_t - center_t|` and returns that residual.
    pub fn ingest_observation(&mut self, y_t: f64) -> Result<f64> {
        let interval = self
            .pending
            .take()
            .ok_or_else(|| Error::Sequence("no interval emitted for this step".into()))?;
        let residual = (y_t - interval.center).abs();
        self.p_values.push(self.window.p_value(residual)?);
        self.window.push(residual)?;
        Ok(residual)
    }

    pub fn intervals(&self) -> &[PredictionInterval] {
        &self.intervals
    }

    pub fn window(&self) -> &ResidualWindow {
        &self.window
    }

    pub fn ensemble(&self) -> &EnsembleState<M> {
        &self.ensemble
    }

    /// Leave-one-out predictions at the most recent test point.
    pub fn loo_cache(&self) -> &[f64] {
        &self.loo_cache
    }

    /// p-value of each ingested residual against the window it was scored by.
    pub fn p_values(&self) -> &[f64] {
        &self.p_values
    }
}

/// Fits once on the training prefix and walks the whole test suffix.
pub fn run_sequential<L: Learner>(
    data: &Dataset,
    learner: &L,
    config: &EnsembleConfig,
    alpha: f64,
    seed: u64,
) -> Result<(SequentialRun<L::Model>, Vec<EvalRecord>)> {
    if data.test_len() == 0 {
        return Err(Error::InsufficientData("no test rows".into()));
    }
    check_alpha(alpha)?;
    let ensemble = fit_ensemble(data, learner, config, seed)?;
    let mut run = SequentialRun::start(ensemble, data, alpha, config.center)?;
    let mut records = Vec::with_capacity(data.test_len());
    for t in data.train_len()..data.len() {
        let interval = run.predict_next(data.row(t))?;
        let y = data.y(t);
        run.ingest_observation(y)?;
        records.push(EvalRecord::new(t + 1, y, &interval));
    }
    Ok((run, records))
}
