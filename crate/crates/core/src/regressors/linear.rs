//! Ridge (closed form, GCV-selected penalty) and lasso (cyclic coordinate
//! descent, GCV with active-set degrees of freedom).
//!
//! `fit_*` standardize features and center the response before solving, then
//! map coefficients back to the original scale. The raw solvers
//! ([`ridge_coefficients`], [`lasso_coordinate_descent`], [`gcv_score`]) work
//! on the matrix exactly as given, with no intercept.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const LASSO_TOL: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub penalty: f64,
}

impl LinearModel {
    pub fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// Column means and scales of a design matrix. Constant columns get scale 1
/// and are zeroed after centering.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(x: &[f64], n: usize, d: usize) -> Self {
        let mut means = vec![0.0; d];
        let mut scales = vec![1.0; d];
        let mut constant = vec![false; d];
        for j in 0..d {
            let col = (0..n).map(|i| x[i * d + j]);
            let mean = col.clone().sum::<f64>() / n as f64;
            // Scale by the largest deviation first so squares cannot overflow.
            let peak = col.clone().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            if peak.is_nan() || peak <= 1e-12 * mean.abs().max(f64::MIN_POSITIVE) {
                constant[j] = true;
            } else {
                let ss = col.map(|v| ((v - mean) / peak).powi(2)).sum::<f64>() / n as f64;
                scales[j] = peak * ss.sqrt();
            }
            means[j] = mean;
        }
        Self {
            means,
            scales,
            constant,
        }
    }

    pub fn transform(&self, x: &[f64], n: usize) -> Vec<f64> {
        let d = self.means.len();
        let mut z = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                if !self.constant[j] {
                    z[i * d + j] = (x[i * d + j] - self.means[j]) / self.scales[j];
                }
            }
        }
        z
    }

    /// Maps standardized-scale coefficients back to the raw feature scale.
    fn unscale(&self, beta: &[f64], y_mean: f64, penalty: f64) -> LinearModel {
        let coefficients: Vec<f64> = beta
            .iter()
            .zip(&self.scales)
            .zip(&self.constant)
            .map(|((b, s), c)| if *c { 0.0 } else { b / s })
            .collect();
        let intercept = y_mean - coefficients.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        LinearModel {
            intercept,
            coefficients,
            penalty,
        }
    }
}

/// Spectral form of a ridge problem, reusable across penalties.
///
/// With `n >= d` it diagonalizes `X^T X`; otherwise the `n x n` Gram matrix
/// `X X^T`, so the cost is governed by the smaller dimension.
struct RidgePath {
    x: DMatrix<f64>,
    y: DVector<f64>,
    primal: bool,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    /// `V^T X^T y` (primal) or `U^T y` (dual).
    projected: DVector<f64>,
}

impl RidgePath {
    fn new(x: &[f64], y: &[f64], n: usize, d: usize) -> Result<Self> {
        let xm = DMatrix::from_row_slice(n, d, x);
        let yv = DVector::from_column_slice(y);
        let primal = n >= d;
        let gram = if primal { xm.tr_mul(&xm) } else { &xm * xm.transpose() };
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("gram matrix overflow".into()));
        }
        let eig = SymmetricEigen::new(gram);
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0)).collect();
        let projected = if primal {
            eig.eigenvectors.tr_mul(&xm.tr_mul(&yv))
        } else {
            eig.eigenvectors.tr_mul(&yv)
        };
        Ok(Self {
            x: xm,
            y: yv,
            primal,
            eigenvalues,
            vectors: eig.eigenvectors,
            projected,
        })
    }

    fn coefficients(&self, penalty: f64) -> DVector<f64> {
        let scaled = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues
                .iter()
                .zip(self.projected.iter())
                .map(|(e, p)| p / (e + penalty)),
        );
        if self.primal {
            &self.vectors * scaled
        } else {
            self.x.tr_mul(&(&self.vectors * scaled))
        }
    }

    fn trace(&self, penalty: f64) -> f64 {
        self.eigenvalues.iter().map(|e| e / (e + penalty)).sum()
    }

    fn residual_ss(&self, beta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * beta).norm_squared()
    }

    fn gcv(&self, penalty: f64) -> (f64, DVector<f64>) {
        let beta = self.coefficients(penalty);
        let score = gcv_from_parts(self.residual_ss(&beta), self.trace(penalty), self.y.len());
        (score, beta)
    }
}

fn gcv_from_parts(rss: f64, dof: f64, n: usize) -> f64 {
    let ratio = dof / n as f64;
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    rss / (n as f64 * (1.0 - ratio).powi(2))
}

fn shape(x: &[f64], y: &[f64], d: usize) -> Result<usize> {
    let n = y.len();
    if d == 0 || x.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: x.len(),
        });
    }
    Ok(n)
}

fn check_penalty(penalty: f64) -> Result<()> {
    if penalty.is_finite() && penalty > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("penalty {penalty} must be positive")))
    }
}

/// `(X^T X + penalty I)^{-1} X^T y` for row-major `x` with `d` columns.
pub fn ridge_coefficients(x: &[f64], y: &[f64], d: usize, penalty: f64) -> Result<Vec<f64>> {
    check_penalty(penalty)?;
    let n = shape(x, y, d)?;
    let path = RidgePath::new(x, y, n, d)?;
    Ok(path.coefficients(penalty).iter().copied().collect())
}

/// Generalized cross-validation score of the ridge hat matrix
/// `H = X (X^T X + penalty I)^{-1} X^T`:
/// `||y - H y||^2 / (n (1 - tr(H)/n)^2)`, or `+inf` once `tr(H) >= n`.
pub fn gcv_score(x: &[f64], y: &[f64], d: usize, penalty: f64) -> Result<f64> {
    check_penalty(penalty)?;
    let n = shape(x, y, d)?;
    Ok(RidgePath::new(x, y, n, d)?.gcv(penalty).0)
}

/// GCV with the lasso's degrees of freedom (number of nonzero coefficients).
pub fn lasso_gcv_score(x: &[f64], y: &[f64], d: usize, beta: &[f64]) -> Result<f64> {
    let n = shape(x, y, d)?;
    let rss: f64 = (0..n)
        .map(|i| {
            let fit: f64 = (0..d).map(|j| x[i * d + j] * beta[j]).sum();
            (y[i] - fit).powi(2)
        })
        .sum();
    let dof = beta.iter().filter(|b| **b != 0.0).count() as f64;
    Ok(gcv_from_parts(rss, dof, n))
}

fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// Minimizes `0.5 ||y - X beta||^2 + penalty ||beta||_1` by cyclic coordinate
/// descent over columns `0..d`, stopping when no coordinate moves more than
/// [`LASSO_TOL`] in a sweep or after [`LASSO_MAX_SWEEPS`] sweeps.
pub fn lasso_coordinate_descent(
    x: &[f64],
    y: &[f64],
    d: usize,
    penalty: f64,
    warm_start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::InvalidArgument(format!("penalty {penalty} must be non-negative")));
    }
    let n = shape(x, y, d)?;
    // Column-major copy for contiguous coordinate updates.
    let columns: Vec<Vec<f64>> = (0..d).map(|j| (0..n).map(|i| x[i * d + j]).collect()).collect();
    let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();

    let mut beta = match warm_start {
        Some(w) if w.len() == d => w.to_vec(),
        _ => vec![0.0; d],
    };
    let mut residual = y.to_vec();
    for (j, col) in columns.iter().enumerate() {
        if beta[j] != 0.0 {
            for (r, v) in residual.iter_mut().zip(col) {
                *r -= v * beta[j];
            }
        }
    }

    for _ in 0..LASSO_MAX_SWEEPS {
        let mut max_step: f64 = 0.0;
        for j in 0..d {
            if norms[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let col = &columns[j];
            let rho = col.iter().zip(&residual).map(|(v, r)| v * r).sum::<f64>() + norms[j] * beta[j];
            let updated = soft_threshold(rho, penalty) / norms[j];
            let step = updated - beta[j];
            if step != 0.0 {
                for (r, v) in residual.iter_mut().zip(col) {
                    *r -= v * step;
                }
                beta[j] = updated;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step <= LASSO_TOL {
            break;
        }
    }
    Ok(beta)
}

fn centered(y: &[f64]) -> (Vec<f64>, f64) {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    (y.iter().map(|v| v - mean).collect(), mean)
}

pub(super) fn fit_ridge(x: &[f64], y: &[f64], d: usize, grid: &[f64]) -> Result<LinearModel> {
    let n = y.len();
    let scaler = Standardizer::fit(x, n, d);
    let z = scaler.transform(x, n);
    let (yc, y_mean) = centered(y);
    let path = RidgePath::new(&z, &yc, n, d)?;

    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    for &penalty in grid {
        let (score, beta) = path.gcv(penalty);
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, penalty, beta));
        }
    }
    let (_, penalty, beta) = best.ok_or_else(|| Error::InvalidArgument("penalty grid is empty".into()))?;
    Ok(scaler.unscale(beta.as_slice(), y_mean, penalty))
}

/// Lasso penalties follow the per-sample convention
/// `(1/2n) ||y - X beta||^2 + penalty ||beta||_1`; the raw solver sees `n * penalty`.
pub(super) fn fit_lasso(x: &[f64], y: &[f64], d: usize, grid: &[f64]) -> Result<LinearModel> {
    let n = y.len();
    let scaler = Standardizer::fit(x, n, d);
    let z = scaler.transform(x, n);
    let (yc, y_mean) = centered(y);

    // Warm-start along decreasing penalties.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[b].total_cmp(&grid[a]));
    let mut results: Vec<Option<(f64, Vec<f64>)>> = vec![None; grid.len()];
    let mut warm: Option<Vec<f64>> = None;
    for &k in &order {
        let beta = lasso_coordinate_descent(&z, &yc, d, grid[k] * n as f64, warm.as_deref())?;
        let score = lasso_gcv_score(&z, &yc, d, &beta)?;
        results[k] = Some((score, beta.clone()));
        warm = Some(beta);
    }

    let mut best: Option<(f64, usize)> = None;
    for (k, r) in results.iter().enumerate() {
        let score = r.as_ref().map_or(f64::INFINITY, |(s, _)| *s);
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, k));
        }
    }
    let (_, k) = best.ok_or_else(|| Error::InvalidArgument("penalty grid is empty".into()))?;
    let (_, beta) = results[k].take().expect("every grid point was solved");
    Ok(scaler.unscale(&beta, y_mean, grid[k]))
}
