//! Split conformal baselines run in the same sliding-window regime as EnPI.
//!
//! Both methods split the training rows at random into a proper set, used to
//! fit one model, and a calibration set whose absolute residuals form the
//! initial window. The window then slides with each test residual
//! `|y_t - f(x_t)|`, keeping its initial length.
//!
//! Weighted ICP reweights the window by an estimated likelihood ratio between
//! the current test covariate and the window covariates: a penalized logistic
//! regression (window rows labelled 0, the test row labelled 1) gives the
//! odds `p/(1-p)` for each row, and the test row's odds are attached to a
//! `+inf` pseudo-residual.

use std::collections::VecDeque;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::EvalRecord;
use crate::interval::{check_alpha, PredictionInterval, ResidualWindow};
use crate::quantile::weighted_quantile;
use crate::regressors::{Learner, Predictor, Standardizer};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_SPLIT_FRACTION: f64 = 0.5;
pub const DEFAULT_WEIGHT_PENALTY: f64 = 10.0;

const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 50;

/// Which interval method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enpi,
    Icp,
    Wicp,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Enpi => "enpi",
            Method::Icp => "icp",
            Method::Wicp => "wicp",
        })
    }
}

/// Fitted proper-set model plus the calibration window.
#[derive(Debug, Clone)]
pub struct SplitState<M> {
    pub proper_model: M,
    pub proper_indices: Vec<usize>,
    pub calibration_indices: Vec<usize>,
    pub calibration_window: ResidualWindow,
    pub split_fraction: f64,
}

impl<M: Predictor> SplitState<M> {
    /// Splits the training rows of `data` and fits on the proper part.
    ///
    /// The calibration set has `floor(T * (1 - split_fraction))` rows drawn
    /// without replacement; both index lists are in time order. The model is
    /// fit with `derive_seed(seed, 0)`.
    pub fn fit<L: Learner<Model = M>>(data: &Dataset, learner: &L, split_fraction: f64, seed: u64) -> Result<Self> {
        let t = data.train_len();
        if t < 4 {
            return Err(Error::InsufficientData(format!("{t} training rows, need at least 4")));
        }
        if !(split_fraction > 0.0 && split_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("split fraction {split_fraction} outside (0, 1)")));
        }
        let cal_len = ((t as f64) * (1.0 - split_fraction)).floor() as usize;
        if cal_len < 1 || cal_len > t - 2 {
            return Err(Error::InsufficientData(format!(
                "split of {t} rows leaves {cal_len} calibration rows"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut calibration_indices = sample(&mut rng, t, cal_len).into_vec();
        calibration_indices.sort_unstable();
        let mut in_cal = vec![false; t];
        calibration_indices.iter().for_each(|&i| in_cal[i] = true);
        let proper_indices: Vec<usize> = (0..t).filter(|&i| !in_cal[i]).collect();

        let (x, y) = data.gather(&proper_indices);
        let proper_model = learner.fit(&x, &y, derive_seed(seed, 0))?;
        let residuals = calibration_indices
            .iter()
            .map(|&i| Ok((data.y(i) - proper_model.predict(data.row(i))?).abs()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            proper_model,
            proper_indices,
            calibration_indices,
            calibration_window: ResidualWindow::from_residuals(residuals)?,
            split_fraction,
        })
    }
}

/// Intervals and scored records of one baseline pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub intervals: Vec<PredictionInterval>,
    pub records: Vec<EvalRecord>,
    /// Steps whose weight model failed and fell back to uniform weights.
    pub fallback_steps: usize,
}

fn check_run(data: &Dataset, alpha: f64) -> Result<()> {
    check_alpha(alpha)?;
    if data.test_len() == 0 {
        return Err(Error::InsufficientData("no test rows".into()));
    }
    Ok(())
}

/// Sequential split conformal with a sliding calibration window.
pub fn run_icp<L: Learner>(data: &Dataset, learner: &L, alpha: f64, seed: u64) -> Result<BaselineRun> {
    check_run(data, alpha)?;
    let split = SplitState::fit(data, learner, DEFAULT_SPLIT_FRACTION, seed)?;
    let mut window = split.calibration_window;
    let mut run = BaselineRun {
        intervals: Vec::with_capacity(data.test_len()),
        records: Vec::with_capacity(data.test_len()),
        fallback_steps: 0,
    };
    for t in data.train_len()..data.len() {
        let center = split.proper_model.predict(data.row(t))?;
        let interval = PredictionInterval::new(center, window.quantile(1.0 - alpha)?, alpha)?;
        let y = data.y(t);
        window.push((y - center).abs())?;
        run.intervals.push(interval);
        run.records.push(EvalRecord::new(t + 1, y, &interval));
    }
    Ok(run)
}

/// How weighted ICP weighs the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Logistic odds with the given ridge penalty.
    Logistic { penalty: f64 },
    /// Every row weighs 1, the `+inf` pseudo-residual included.
    Uniform,
}

impl Default for WeightScheme {
    fn default() -> Self {
        WeightScheme::Logistic {
            penalty: DEFAULT_WEIGHT_PENALTY,
        }
    }
}

pub fn run_weighted_icp<L: Learner>(data: &Dataset, learner: &L, alpha: f64, seed: u64) -> Result<BaselineRun> {
    run_weighted_icp_with(data, learner, alpha, seed, WeightScheme::default())
}

pub fn run_weighted_icp_with<L: Learner>(
    data: &Dataset,
    learner: &L,
    alpha: f64,
    seed: u64,
    scheme: WeightScheme,
) -> Result<BaselineRun> {
    check_run(data, alpha)?;
    if let WeightScheme::Logistic { penalty } = scheme {
        if !(penalty.is_finite() && penalty > 0.0) {
            return Err(Error::InvalidArgument(format!("weight penalty {penalty} must be positive")));
        }
    }
    let split = SplitState::fit(data, learner, DEFAULT_SPLIT_FRACTION, seed)?;
    let mut window = split.calibration_window;
    // rows whose residuals currently sit in the window, oldest first
    let mut rows: VecDeque<usize> = split.calibration_indices.iter().copied().collect();
    let d = data.n_features();
    let mut run = BaselineRun {
        intervals: Vec::with_capacity(data.test_len()),
        records: Vec::with_capacity(data.test_len()),
        fallback_steps: 0,
    };

    for t in data.train_len()..data.len() {
        let center = split.proper_model.predict(data.row(t))?;
        let m = rows.len();
        let weights = match scheme {
            WeightScheme::Uniform => vec![1.0; m + 1],
            WeightScheme::Logistic { penalty } => {
                let mut x = Vec::with_capacity((m + 1) * d);
                rows.iter().for_each(|&r| x.extend_from_slice(data.row(r)));
                x.extend_from_slice(data.row(t));
                match shift_weights(&x, m, d, penalty) {
                    Ok(w) => w,
                    Err(e) => {
                        warn!("step {}: weight model failed ({e}); using uniform weights", t + 1);
                        run.fallback_steps += 1;
                        vec![1.0; m + 1]
                    }
                }
            }
        };
        let mut values = window.to_vec();
        values.push(f64::INFINITY);
        let half_width = weighted_quantile(&values, &weights, 1.0 - alpha)?;
        let interval = PredictionInterval::new(center, half_width, alpha)?;

        let y = data.y(t);
        window.push((y - center).abs())?;
        rows.pop_front();
        rows.push_back(t);
        run.intervals.push(interval);
        run.records.push(EvalRecord::new(t + 1, y, &interval));
    }
    Ok(run)
}

/// Odds weights for `m` window rows followed by one test row (row-major `x`).
///
/// Features are standardized with the window rows' statistics. Weights are
/// `exp(eta - max eta)`, which leaves the normalized weights unchanged.
pub fn shift_weights(x: &[f64], m: usize, d: usize, penalty: f64) -> Result<Vec<f64>> {
    let n = m + 1;
    let z = Standardizer::fit(&x[..m * d], m, d).transform(x, n);
    let mut labels = vec![0.0; n];
    labels[m] = 1.0;
    let model = fit_logistic(&z, &labels, d, penalty)?;
    let eta: Vec<f64> = (0..n).map(|i| model.linear_predictor(&z[i * d..(i + 1) * d])).collect();
    let top = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - top).exp()).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite shift weights".into()));
    }
    Ok(w)
}

/// Penalized logistic regression `P(label = 1 | x) = 1 / (1 + exp(-(b + x'w)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
}

impl WeightModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }

    /// `p / (1 - p)`, computed as `exp(eta)`.
    pub fn odds(&self, x: &[f64]) -> f64 {
        self.linear_predictor(x).exp()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(eta))` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Objective minimized by [`fit_logistic`]:
/// `mean_i [log(1 + exp(eta_i)) - y_i eta_i] + penalty/2 * |w|^2`,
/// with the intercept unpenalized.
pub fn logistic_objective(x: &[f64], labels: &[f64], d: usize, penalty: f64, intercept: f64, w: &[f64]) -> f64 {
    let n = labels.len();
    let loss: f64 = (0..n)
        .map(|i| {
            let eta = intercept + x[i * d..(i + 1) * d].iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            softplus(eta) - labels[i] * eta
        })
        .sum::<f64>()
        / n as f64;
    loss + 0.5 * penalty * w.iter().map(|v| v * v).sum::<f64>()
}

/// Damped Newton on [`logistic_objective`] until the gradient norm is at
/// most 1e-8 (100 iterations at most).
///
/// The Newton system is solved in the primal when `d + 1 <= n`; otherwise the
/// coefficient block is inverted through the `n x n` Woodbury form and the
/// intercept eliminated by its Schur complement.
pub fn fit_logistic(x: &[f64], labels: &[f64], d: usize, penalty: f64) -> Result<WeightModel> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if x.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: x.len(),
        });
    }
    if let Some(i) = labels.iter().position(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::InvalidValue(format!("labels[{i}] = {} is not 0 or 1", labels[i])));
    }
    if !(penalty.is_finite() && penalty > 0.0) {
        return Err(Error::InvalidArgument(format!("penalty {penalty} must be positive")));
    }
    crate::error::ensure_finite(x, "features")?;
    let positives = labels.iter().filter(|&&l| l == 1.0).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels);
    }

    let zm = DMatrix::from_row_slice(n, d, x);
    let y = DVector::from_column_slice(labels);
    let nf = n as f64;
    // start at the intercept-only optimum
    let rate = positives as f64 / nf;
    let mut b = (rate / (1.0 - rate)).ln();
    let mut w = DVector::zeros(d);
    let mut obj = logistic_objective(x, labels, d, penalty, b, w.as_slice());

    for iter in 0..=NEWTON_MAX_ITER {
        let eta = (&zm * &w).add_scalar(b);
        let p = eta.map(sigmoid);
        let r = &p - &y;
        let gw = zm.tr_mul(&r) / nf + &w * penalty;
        let gb = r.sum() / nf;
        let gnorm = (gw.norm_squared() + gb * gb).sqrt();
        if gnorm <= NEWTON_TOL {
            return Ok(WeightModel {
                intercept: b,
                coefficients: w.as_slice().to_vec(),
                iterations: iter,
            });
        }
        if iter == NEWTON_MAX_ITER {
            break;
        }
        let dvec = p.map(|v| v * (1.0 - v));
        let (step_w, step_b) = newton_step(&zm, &dvec, penalty, &gw, gb)?;

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let w_new = &w - &step_w * scale;
            let b_new = b - step_b * scale;
            let obj_new = logistic_objective(x, labels, d, penalty, b_new, w_new.as_slice());
            if obj_new <= obj {
                w = w_new;
                b = b_new;
                obj = obj_new;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // no descent left at machine precision
            break;
        }
    }
    Err(Error::Numerical(format!(
        "logistic fit did not reach gradient norm {NEWTON_TOL} in {NEWTON_MAX_ITER} iterations"
    )))
}

/// Solves `[A c; c' h] [sw; sb] = [gw; gb]` for the Newton direction, where
/// `A = Z'DZ/n + penalty I`, `c = Z'D1/n` and `h = sum(D)/n`.
fn newton_step(
    z: &DMatrix<f64>,
    dvec: &DVector<f64>,
    penalty: f64,
    gw: &DVector<f64>,
    gb: f64,
) -> Result<(DVector<f64>, f64)> {
    let (n, d) = z.shape();
    let nf = n as f64;
    let c = z.tr_mul(dvec) / nf;
    let h = dvec.sum() / nf;
    let singular = || Error::Numerical("singular Newton system".into());

    if d < n {
        let mut hess = DMatrix::zeros(d + 1, d + 1);
        let mut zd = z.clone();
        for (i, mut row) in zd.row_iter_mut().enumerate() {
            row *= dvec[i];
        }
        let a = z.tr_mul(&zd) / nf + DMatrix::identity(d, d) * penalty;
        hess.view_mut((0, 0), (d, d)).copy_from(&a);
        hess.view_mut((0, d), (d, 1)).copy_from(&c);
        hess.view_mut((d, 0), (1, d)).copy_from(&c.transpose());
        hess[(d, d)] = h;
        let mut g = DVector::zeros(d + 1);
        g.rows_mut(0, d).copy_from(gw);
        g[d] = gb;
        let step = hess.cholesky().ok_or_else(singular)?.solve(&g);
        return Ok((step.rows(0, d).into_owned(), step[d]));
    }

    // A = penalty I + U'U with U = D^{1/2} Z / sqrt(n), so
    // A^{-1} v = (v - U'(penalty I + UU')^{-1} U v) / penalty.
    let mut u = z.clone() / nf.sqrt();
    for (i, mut row) in u.row_iter_mut().enumerate() {
        row *= dvec[i].sqrt();
    }
    let inner = &u * u.transpose() + DMatrix::identity(n, n) * penalty;
    let chol = inner.cholesky().ok_or_else(singular)?;
    let a_inv = |v: &DVector<f64>| -> DVector<f64> { (v - u.tr_mul(&chol.solve(&(&u * v)))) / penalty };

    let a_inv_c = a_inv(&c);
    let a_inv_g = a_inv(gw);
    let schur = h - c.dot(&a_inv_c);
    if schur.is_nan() || schur <= 0.0 {
        return Err(singular());
    }
    let sb = (gb - c.dot(&a_inv_g)) / schur;
    let sw = a_inv_g - a_inv_c * sb;
    Ok((sw, sb))
}
