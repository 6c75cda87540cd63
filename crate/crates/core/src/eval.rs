//! Interval scoring and experiment aggregation.

use crate::baselines::{run_icp, run_weighted_icp_with, Method, WeightScheme};
use crate::dataset::Dataset;
use crate::datagen::{generate, SimConfig};
use crate::enpi::{fit_ensemble, run_sequential, Aggregation, EnsembleConfig};
use crate::error::{Error, Result};
use crate::interval::{check_alpha, PredictionInterval};
use crate::regressors::{Learner, Predictor};
use crate::rng::derive_seed;

/// Outcome of one interval against the revealed response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    /// 1-based row index in the dataset.
    pub t: usize,
    pub y_true: f64,
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    pub width: f64,
    pub winkler: f64,
}

impl EvalRecord {
    pub fn new(t: usize, y_true: f64, interval: &PredictionInterval) -> Self {
        Self::from_bounds(t, y_true, interval.center, interval.lower(), interval.upper(), interval.alpha)
    }

    pub fn from_bounds(t: usize, y_true: f64, center: f64, lower: f64, upper: f64, alpha: f64) -> Self {
        Self {
            t,
            y_true,
            center,
            lower,
            upper,
            covered: lower <= y_true && y_true <= upper,
            width: upper - lower,
            winkler: winkler_bounds(lower, upper, y_true, alpha),
        }
    }
}

fn winkler_bounds(lower: f64, upper: f64, y: f64, alpha: f64) -> f64 {
    let width = upper - lower;
    if y < lower {
        width + 2.0 * (lower - y) / alpha
    } else if y > upper {
        width + 2.0 * (y - upper) / alpha
    } else {
        width
    }
}

/// Width plus `2/alpha` times the distance by which `y` escapes the interval.
pub fn winkler_score(lower: f64, upper: f64, y: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if lower > upper {
        return Err(Error::InvalidArgument(format!("lower {lower} > upper {upper}")));
    }
    Ok(winkler_bounds(lower, upper, y, alpha))
}

pub fn coverage_rate(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(records.iter().filter(|r| r.covered).count() as f64 / records.len() as f64)
}

/// Per-trial means of one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub coverage: f64,
    pub width: f64,
    pub winkler: f64,
    pub n_records: usize,
}

impl TrialSummary {
    pub fn from_records(records: &[EvalRecord]) -> Result<Self> {
        let n = records.len();
        let coverage = coverage_rate(records)?;
        Ok(Self {
            coverage,
            width: records.iter().map(|r| r.width).sum::<f64>() / n as f64,
            winkler: records.iter().map(|r| r.winkler).sum::<f64>() / n as f64,
            n_records: n,
        })
    }
}

/// Mean and sample SD across trials of coverage, width and Winkler score.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: String,
    pub regressor: String,
    pub dataset: String,
    pub alpha: f64,
    pub n_trials: usize,
    pub coverage_mean: f64,
    pub coverage_sd: f64,
    pub width_mean: f64,
    pub width_sd: f64,
    pub winkler_mean: f64,
    pub winkler_sd: f64,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentReport {
    /// Aggregates one record list per trial.
    pub fn from_trials(
        method: &str,
        regressor: &str,
        dataset: &str,
        alpha: f64,
        trials: &[Vec<EvalRecord>],
    ) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::EmptySample);
        }
        let summaries = trials
            .iter()
            .map(|t| TrialSummary::from_records(t))
            .collect::<Result<Vec<_>>>()?;
        let (coverage_mean, coverage_sd) = mean_sd(summaries.iter().map(|s| s.coverage));
        let (width_mean, width_sd) = mean_sd(summaries.iter().map(|s| s.width));
        let (winkler_mean, winkler_sd) = mean_sd(summaries.iter().map(|s| s.winkler));
        Ok(Self {
            method: method.to_string(),
            regressor: regressor.to_string(),
            dataset: dataset.to_string(),
            alpha,
            n_trials: trials.len(),
            coverage_mean,
            coverage_sd,
            width_mean,
            width_sd,
            winkler_mean,
            winkler_sd,
        })
    }
}

/// Runs one method over the test segment of `data`.
pub fn run_method<L: Learner>(
    method: Method,
    data: &Dataset,
    learner: &L,
    config: &EnsembleConfig,
    weights: WeightScheme,
    alpha: f64,
    seed: u64,
) -> Result<Vec<EvalRecord>> {
    Ok(match method {
        Method::Enpi => run_sequential(data, learner, config, alpha, seed)?.1,
        Method::Icp => run_icp(data, learner, alpha, seed)?.records,
        Method::Wicp => run_weighted_icp_with(data, learner, alpha, seed, weights)?.records,
    })
}

/// Where each trial's data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// A fresh simulation per trial.
    Simulated(SimConfig),
    /// The same series every trial; only the method's randomness varies.
    Fixed(Dataset),
}

impl DataSource {
    /// Data of trial `k` under the root `seed`.
    pub fn trial_data(&self, seed: u64, k: usize) -> Result<std::borrow::Cow<'_, Dataset>> {
        match self {
            DataSource::Simulated(sim) => {
                let mut sim = sim.clone();
                sim.seed = derive_seed(derive_seed(seed, k as u64), 0);
                Ok(std::borrow::Cow::Owned(generate(&sim)?))
            }
            DataSource::Fixed(data) => Ok(std::borrow::Cow::Borrowed(data)),
        }
    }
}

/// Independent trials of one method, in trial order.
///
/// Trial `k` uses `derive_seed(seed, k)`: stream 0 of it seeds the simulation
/// and stream 1 the method, so every method sees the same data in trial `k`.
/// Trials run under `config.execution`.
#[allow(clippy::too_many_arguments)]
pub fn run_trials<L: Learner>(
    method: Method,
    source: &DataSource,
    learner: &L,
    config: &EnsembleConfig,
    weights: WeightScheme,
    alpha: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<Vec<EvalRecord>>> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be positive".into()));
    }
    config.execution.try_map_range(n_trials, |k| {
        let data = source.trial_data(seed, k)?;
        let method_seed = derive_seed(derive_seed(seed, k as u64), 1);
        run_method(method, &data, learner, config, weights, alpha, method_seed)
    })
}

/// `n` alphas whose `1 - alpha` values are evenly spaced over `[0.05, 0.95]`,
/// ordered by increasing `1 - alpha`. The grid is symmetric, so the alphas
/// are taken from it directly rather than as `1 - c`.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    let mut grid = crate::regressors::linear_grid(0.05, 0.95, n);
    grid.reverse();
    grid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityRow {
    pub alpha: f64,
    /// Empirical `P(p <= alpha)`.
    pub frequency: f64,
    /// `frequency - alpha`.
    pub deviation: f64,
}

/// Empirical check of p-value validity: for each `alpha`, how often the
/// p-value of a new residual was at most `alpha`.
pub fn pvalue_uniformity_report(p_values: &[f64], alphas: &[f64]) -> Result<Vec<UniformityRow>> {
    if p_values.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = p_values.len() as f64;
    Ok(alphas
        .iter()
        .map(|&alpha| {
            let frequency = p_values.iter().filter(|&&p| p <= alpha).count() as f64 / n;
            UniformityRow {
                alpha,
                frequency,
                deviation: frequency - alpha,
            }
        })
        .collect())
}

/// p-values for a stream of `(window, new residual)` pairs.
pub fn p_values_from_stream<'a>(stream: impl IntoIterator<Item = (&'a [f64], f64)>) -> Result<Vec<f64>> {
    stream
        .into_iter()
        .map(|(window, eps)| crate::quantile::empirical_p_value(window, eps))
        .collect()
}

pub fn max_abs_deviation(rows: &[UniformityRow]) -> f64 {
    rows.iter().map(|r| r.deviation.abs()).fold(0.0, f64::max)
}

/// Held-out errors of the mean ensemble against its own members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseTrial {
    pub ensemble_mse: f64,
    pub member_mse: f64,
    pub ensemble_mae: f64,
    pub member_mae: f64,
    /// Every held-out point satisfied `|y - mean_b f_b| <= mean_b |y - f_b|`.
    pub pointwise_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseReport {
    pub trials: Vec<MseTrial>,
    pub mean_ensemble_mse: f64,
    pub mean_member_mse: f64,
    pub mean_ensemble_mae: f64,
    pub mean_member_mae: f64,
    /// Fraction of trials where the ensemble MSE did not exceed the member average.
    pub fraction_no_worse: f64,
}

/// Held-out comparison for one ensemble of members. Errors are accumulated in
/// the deviation domain (`f_b - y`) so the pointwise triangle inequality holds
/// exactly in floating point as well.
pub fn score_members<M: Predictor>(models: &[M], x: &[f64], y: &[f64]) -> Result<MseTrial> {
    if models.is_empty() || y.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = x.len() / y.len();
    let b = models.len() as f64;
    let (mut e_sq, mut m_sq, mut e_abs, mut m_abs) = (0.0, 0.0, 0.0, 0.0);
    let mut pointwise_ok = true;
    for (i, &yi) in y.iter().enumerate() {
        let row = &x[i * d..(i + 1) * d];
        let mut dev_sum = 0.0;
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        for m in models {
            let dev = m.predict(row)? - yi;
            dev_sum += dev;
            abs_sum += dev.abs();
            sq_sum += dev * dev;
        }
        let ens_abs = dev_sum.abs() / b;
        let mem_abs = abs_sum / b;
        pointwise_ok &= ens_abs <= mem_abs;
        e_abs += ens_abs;
        m_abs += mem_abs;
        e_sq += (dev_sum / b).powi(2);
        m_sq += sq_sum / b;
    }
    let n = y.len() as f64;
    Ok(MseTrial {
        ensemble_mse: e_sq / n,
        member_mse: m_sq / n,
        ensemble_mae: e_abs / n,
        member_mae: m_abs / n,
        pointwise_ok,
    })
}

/// Monte-Carlo comparison of the mean ensemble against its members on
/// simulated data: one fresh dataset and ensemble per trial, evaluated on the
/// dataset's test segment.
pub fn ensemble_mse_check<L: Learner>(
    data_spec: &SimConfig,
    learner: &L,
    config: &EnsembleConfig,
    n_trials: usize,
    seed: u64,
) -> Result<MseReport> {
    if config.phi != Aggregation::Mean {
        return Err(Error::InvalidArgument("ensemble check requires mean aggregation".into()));
    }
    if n_trials == 0 {
        return Err(Error::EmptySample);
    }
    let trials = config.execution.try_map_range(n_trials, |k| {
        let trial_seed = derive_seed(seed, k as u64);
        let mut sim = data_spec.clone();
        sim.seed = derive_seed(trial_seed, 0);
        let data = generate(&sim)?;
        let inner = EnsembleConfig {
            execution: crate::par::Execution::Sequential,
            ..*config
        };
        let ensemble = fit_ensemble(&data, learner, &inner, derive_seed(trial_seed, 1))?;
        let test: Vec<usize> = (data.train_len()..data.len()).collect();
        let (x, y) = data.gather(&test);
        score_members(ensemble.models(), &x, &y)
    })?;
    let n = trials.len() as f64;
    let avg = |f: fn(&MseTrial) -> f64| trials.iter().map(f).sum::<f64>() / n;
    Ok(MseReport {
        mean_ensemble_mse: avg(|t| t.ensemble_mse),
        mean_member_mse: avg(|t| t.member_mse),
        mean_ensemble_mae: avg(|t| t.ensemble_mae),
        mean_member_mae: avg(|t| t.member_mae),
        fraction_no_worse: trials.iter().filter(|t| t.ensemble_mse <= t.member_mse).count() as f64 / n,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winkler_footnote_cases() {
        assert_eq!(winkler_score(0.0, 1.0, 0.5, 0.1).unwrap(), 1.0);
        assert_eq!(winkler_score(0.0, 1.0, -0.5, 0.1).unwrap(), 11.0);
        assert!((winkler_score(0.0, 1.0, 1.2, 0.1).unwrap() - 5.0).abs() < 1e-12);
        assert!(winkler_score(1.0, 0.0, 0.5, 0.1).is_err());
        assert!(winkler_score(0.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn winkler_continuous_at_endpoints() {
        for (l, u) in [(0.0, 1.0), (-3.0, 2.5)] {
            let w = u - l;
            for eps in [1e-6, 1e-9] {
                assert!((winkler_score(l, u, l - eps, 0.2).unwrap() - w).abs() < 1e-4);
                assert!((winkler_score(l, u, u + eps, 0.2).unwrap() - w).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn coverage_counts() {
        let pi = PredictionInterval::new(0.0, 1.0, 0.1).unwrap();
        let inside: Vec<EvalRecord> = (0..10).map(|t| EvalRecord::new(t, 0.5, &pi)).collect();
        assert_eq!(coverage_rate(&inside).unwrap(), 1.0);
        let outside: Vec<EvalRecord> = (0..10).map(|t| EvalRecord::new(t, 5.0, &pi)).collect();
        assert_eq!(coverage_rate(&outside).unwrap(), 0.0);
        let mut mixed = inside.clone();
        mixed[3] = outside[3];
        assert_eq!(coverage_rate(&mixed).unwrap(), 0.9);
        assert_eq!(coverage_rate(&[]), Err(Error::EmptySample));
    }

    #[test]
    fn report_mean_and_sd() {
        let pi = PredictionInterval::new(0.0, 1.0, 0.1).unwrap();
        let a: Vec<EvalRecord> = (0..4).map(|t| EvalRecord::new(t, 0.0, &pi)).collect();
        let b: Vec<EvalRecord> = (0..4).map(|t| EvalRecord::new(t, if t < 2 { 0.0 } else { 3.0 }, &pi)).collect();
        let r = ExperimentReport::from_trials("enpi", "ridge", "toy", 0.1, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(r.coverage_mean, 0.75);
        assert!((r.coverage_sd - (0.125f64).sqrt()).abs() < 1e-12);
        assert_eq!(r.width_mean, 2.0);
        let single = ExperimentReport::from_trials("enpi", "ridge", "toy", 0.1, &[a]).unwrap();
        assert_eq!(single.coverage_sd, 0.0);
    }

    #[test]
    fn alpha_grid_spacing() {
        let g = alpha_grid(10);
        assert_eq!(g.len(), 10);
        assert!((g[0] - 0.95).abs() < 1e-12 && (g[9] - 0.05).abs() < 1e-12);
        assert!((g[0] - g[1] - 0.1).abs() < 1e-12);
        assert_eq!(g[9], 0.05);
    }

    #[test]
    fn uniform_p_values_deviate_at_most_one_over_t() {
        let t = 50;
        let p: Vec<f64> = (0..t).map(|k| k as f64 / t as f64).collect();
        let alphas: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
        let rows = pvalue_uniformity_report(&p, &alphas).unwrap();
        assert!(max_abs_deviation(&rows) <= 1.0 / t as f64 + 1e-12);
    }

    #[test]
    fn adversarial_stream_always_rejects() {
        let window = [1.0, 2.0, 3.0];
        let stream = (0..20).map(|k| (&window[..], 10.0 + k as f64));
        let p = p_values_from_stream(stream).unwrap();
        let rows = pvalue_uniformity_report(&p, &[0.01, 0.5, 0.9]).unwrap();
        assert!(rows.iter().all(|r| r.frequency == 1.0));
    }

    #[derive(Debug)]
    struct Const(f64);
    impl Predictor for Const {
        fn n_features(&self) -> usize {
            1
        }
        fn predict_unchecked(&self, _: &[f64]) -> f64 {
            self.0
        }
    }

    #[test]
    fn identical_members_match_exactly() {
        let models = vec![Const(0.3), Const(0.3), Const(0.3)];
        let s = score_members(&models, &[0.0, 1.0, 2.0], &[1.0, -2.0, 0.25]).unwrap();
        assert_eq!(s.ensemble_mse, s.member_mse);
        assert_eq!(s.ensemble_mae, s.member_mae);
        assert!(s.pointwise_ok);
    }

    #[test]
    fn spread_members_improve() {
        let models = vec![Const(-1.0), Const(1.0)];
        let s = score_members(&models, &[0.0], &[0.0]).unwrap();
        assert_eq!(s.ensemble_mse, 0.0);
        assert_eq!(s.member_mse, 1.0);
    }
}
