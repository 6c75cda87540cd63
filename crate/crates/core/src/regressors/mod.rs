//! Base regression algorithms wrapped by the ensemble and the split baselines.
//!
//! [`Learner`] and [`Predictor`] are the plug-in points: anything that can be
//! fit on a row-major block with a seed and then evaluated on one feature
//! vector can sit inside an ensemble. [`RegressorSpec`] is the built-in
//! learner covering ridge, lasso and a depth-limited random forest.

mod forest;
mod linear;

pub use forest::{Forest, Node, Tree};
pub use linear::{gcv_score, lasso_coordinate_descent, lasso_gcv_score, ridge_coefficients, LinearModel, Standardizer};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// A fitted model that maps one feature vector to a point prediction.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;

    /// Prediction without the dimension check.
    fn predict_unchecked(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }
}

/// A regression algorithm. `x` is row-major with `y.len()` rows.
pub trait Learner: Sync {
    type Model: Predictor;

    fn fit(&self, x: &[f64], y: &[f64], seed: u64) -> Result<Self::Model>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorFamily {
    Ridge,
    Lasso,
    Forest,
}

impl std::fmt::Display for RegressorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegressorFamily::Ridge => "ridge",
            RegressorFamily::Lasso => "lasso",
            RegressorFamily::Forest => "forest",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub family: RegressorFamily,
    /// Candidate penalties for the linear families; the one with the lowest
    /// GCV score is used.
    pub penalty_grid: Vec<f64>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub const DEFAULT_PENALTY_MIN: f64 = 1e-4;
pub const DEFAULT_PENALTY_MAX: f64 = 10.0;
pub const DEFAULT_PENALTY_POINTS: usize = 10;

impl RegressorSpec {
    pub fn new(family: RegressorFamily) -> Self {
        Self {
            family,
            penalty_grid: linear_grid(DEFAULT_PENALTY_MIN, DEFAULT_PENALTY_MAX, DEFAULT_PENALTY_POINTS),
            n_trees: 10,
            max_depth: 2,
            seed: 0,
        }
    }

    pub fn ridge() -> Self {
        Self::new(RegressorFamily::Ridge)
    }

    pub fn lasso() -> Self {
        Self::new(RegressorFamily::Lasso)
    }

    pub fn forest() -> Self {
        Self::new(RegressorFamily::Forest)
    }

    pub fn with_penalty_grid(mut self, grid: Vec<f64>) -> Self {
        self.penalty_grid = grid;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            RegressorFamily::Ridge | RegressorFamily::Lasso => {
                if self.penalty_grid.is_empty() {
                    return Err(Error::InvalidArgument("penalty grid is empty".into()));
                }
                if let Some(p) = self.penalty_grid.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
                    return Err(Error::InvalidArgument(format!("penalty {p} must be positive")));
                }
            }
            RegressorFamily::Forest => {
                if self.n_trees == 0 {
                    return Err(Error::InvalidArgument("n_trees must be at least 1".into()));
                }
                if self.max_depth == 0 {
                    return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Fits with the spec's own seed.
    pub fn fit_with_spec_seed(&self, x: &[f64], y: &[f64]) -> Result<FittedModel> {
        self.fit(x, y, self.seed)
    }
}

/// Output of [`RegressorSpec`]: either a linear model or a forest.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear {
        family: RegressorFamily,
        model: LinearModel,
    },
    Forest(Forest),
}

impl FittedModel {
    pub fn family(&self) -> RegressorFamily {
        match self {
            FittedModel::Linear { family, .. } => *family,
            FittedModel::Forest(_) => RegressorFamily::Forest,
        }
    }

    pub fn chosen_penalty(&self) -> Option<f64> {
        match self {
            FittedModel::Linear { model, .. } => Some(model.penalty),
            FittedModel::Forest(_) => None,
        }
    }
}

impl Predictor for FittedModel {
    fn n_features(&self) -> usize {
        match self {
            FittedModel::Linear { model, .. } => model.coefficients.len(),
            FittedModel::Forest(forest) => forest.n_features(),
        }
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            FittedModel::Linear { model, .. } => model.predict_unchecked(x),
            FittedModel::Forest(forest) => forest.predict_unchecked(x),
        }
    }
}

pub(crate) fn check_design(x: &[f64], y: &[f64]) -> Result<usize> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} rows, need at least 2")));
    }
    if x.is_empty() || !x.len().is_multiple_of(n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    ensure_finite(x, "x")?;
    ensure_finite(y, "y")?;
    Ok(x.len() / n)
}

impl Learner for RegressorSpec {
    type Model = FittedModel;

    fn fit(&self, x: &[f64], y: &[f64], seed: u64) -> Result<FittedModel> {
        self.validate()?;
        let d = check_design(x, y)?;
        match self.family {
            RegressorFamily::Ridge => Ok(FittedModel::Linear {
                family: self.family,
                model: linear::fit_ridge(x, y, d, &self.penalty_grid)?,
            }),
            RegressorFamily::Lasso => Ok(FittedModel::Linear {
                family: self.family,
                model: linear::fit_lasso(x, y, d, &self.penalty_grid)?,
            }),
            RegressorFamily::Forest => Ok(FittedModel::Forest(forest::fit_forest(
                x,
                y,
                d,
                self.n_trees,
                self.max_depth,
                seed,
            ))),
        }
    }
}
