//! Order-statistic quantiles and the empirical conformal p-value.
//!
//! The empirical quantile at `level` is the k-th smallest value with
//! `k = min(n, ceil(level * (n + 1)))`. With this convention a new residual is
//! below the `1 - alpha` quantile exactly when its p-value is at least `alpha`
//! (for distinct values and `alpha * n` integral).

use crate::error::{ensure_finite, Error, Result};

/// Products this close to an integer are treated as that integer before the
/// ceiling, so `0.7 * 10` does not round up to 8.
const INTEGRALITY_TOL: f64 = 1e-9;

pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= INTEGRALITY_TOL * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Rank (1-based) used by [`empirical_quantile`] for a sample of size `n`.
pub fn quantile_rank(n: usize, level: f64) -> usize {
    let k = ceil_tolerant(level * (n as f64 + 1.0));
    (k.max(1.0) as usize).min(n)
}

fn check_level(level: f64) -> Result<()> {
    if level.is_finite() && level > 0.0 && level <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("quantile level {level} outside (0, 1]")))
    }
}

pub fn empirical_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    ensure_finite(values, "values")?;
    check_level(level)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(values.len(), level) - 1])
}

/// Quantile of a weighted sample: the smallest value whose cumulative
/// normalized weight reaches `level`.
///
/// Values may include `+inf` (used as a pseudo-residual by weighted split
/// conformal); NaN is rejected. Weights must be finite and non-negative.
pub fn weighted_quantile(values: &[f64], weights: &[f64], level: f64) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: weights.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::InvalidValue(format!("values[{i}] = NaN")));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidValue(format!("weights[{i}] = {}", weights[i])));
    }
    check_level(level)?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("total weight must be positive".into()));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let target = level * total * (1.0 - INTEGRALITY_TOL);
    let mut cumulative = 0.0;
    let mut last_positive = order[0];
    for &i in &order {
        if weights[i] > 0.0 {
            cumulative += weights[i];
            last_positive = i;
            if cumulative >= target {
                return Ok(values[i]);
            }
        }
    }
    Ok(values[last_positive])
}

/// Fraction of `residuals` strictly greater than `eps_new`.
pub fn empirical_p_value(residuals: &[f64], eps_new: f64) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::EmptySample);
    }
    ensure_finite(residuals, "residuals")?;
    if eps_new.is_nan() {
        return Err(Error::InvalidValue("eps_new = NaN".into()));
    }
    let above = residuals.iter().filter(|&&r| r > eps_new).count();
    Ok(above as f64 / residuals.len() as f64)
}
