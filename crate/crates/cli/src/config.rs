use std::path::{Path, PathBuf};

use enpi::baselines::DEFAULT_WEIGHT_PENALTY;
use enpi::enpi::DEFAULT_TRIM;
use enpi::regressors::RegressorFamily;
use enpi::{Aggregation, CenterMode, EnsembleConfig, Method, RegressorSpec, SimConfig, WeightScheme};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    Mean,
    Median,
    TrimmedMean,
}

/// Settings of `run` and `sweep`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub method: Method,
    /// Methods compared by `sweep`; defaults to `[method]`.
    pub methods: Option<Vec<Method>>,
    pub regressor: RegressorFamily,
    pub penalty_grid: Option<Vec<f64>>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub alpha: f64,
    /// Alphas swept by `sweep`; defaults to the 10-point grid.
    pub alphas: Option<Vec<f64>>,
    pub b_tilde: usize,
    pub phi: Phi,
    pub trim: f64,
    pub center: CenterMode,
    pub weight_penalty: f64,
    pub train_fraction: f64,
    pub n_trials: usize,
    pub seed: u64,
    /// CSV dataset; relative to the config file.
    pub dataset: Option<PathBuf>,
    /// Simulation config file; relative to the config file.
    pub simulation: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = RegressorSpec::ridge();
        Self {
            method: Method::Enpi,
            methods: None,
            regressor: RegressorFamily::Ridge,
            penalty_grid: None,
            n_trees: spec.n_trees,
            max_depth: spec.max_depth,
            alpha: 0.1,
            alphas: None,
            b_tilde: 100,
            phi: Phi::Mean,
            trim: DEFAULT_TRIM,
            center: CenterMode::LooQuantile,
            weight_penalty: DEFAULT_WEIGHT_PENALTY,
            train_fraction: 0.3,
            n_trials: 10,
            seed: 0,
            dataset: None,
            simulation: None,
            output: None,
        }
    }
}

fn check_alpha(name: &str, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} {alpha} outside (0, 1)")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha("alpha", self.alpha)?;
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() {
                return Err(CliError::Config("alphas is empty".into()));
            }
            alphas.iter().try_for_each(|&a| check_alpha("alphas entry", a))?;
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        if self.n_trials == 0 {
            return Err(CliError::Config("n_trials must be at least 1".into()));
        }
        if matches!(&self.methods, Some(m) if m.is_empty()) {
            return Err(CliError::Config("methods is empty".into()));
        }
        match (&self.dataset, &self.simulation) {
            (Some(_), Some(_)) => Err(CliError::Config("set only one of dataset and simulation".into())),
            (None, None) => Err(CliError::Config("one of dataset or simulation is required".into())),
            _ => Ok(()),
        }?;
        self.regressor_spec().validate()?;
        self.phi().validate()?;
        Ok(())
    }

    pub fn regressor_spec(&self) -> RegressorSpec {
        let mut spec = RegressorSpec::new(self.regressor);
        if let Some(grid) = &self.penalty_grid {
            spec.penalty_grid = grid.clone();
        }
        spec.n_trees = self.n_trees;
        spec.max_depth = self.max_depth;
        spec
    }

    pub fn phi(&self) -> Aggregation {
        match self.phi {
            Phi::Mean => Aggregation::Mean,
            Phi::Median => Aggregation::Median,
            Phi::TrimmedMean => Aggregation::TrimmedMean(self.trim),
        }
    }

    pub fn ensemble(&self) -> EnsembleConfig {
        EnsembleConfig {
            b_tilde: self.b_tilde,
            phi: self.phi(),
            center: self.center,
            ..EnsembleConfig::default()
        }
    }

    pub fn weights(&self) -> WeightScheme {
        WeightScheme::Logistic {
            penalty: self.weight_penalty,
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| vec![self.method])
    }

    /// Makes relative data paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.dataset, &mut self.simulation].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path)
}

pub fn load_run(path: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = load(path)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

pub fn load_sim(path: &Path) -> Result<SimConfig> {
    let cfg: SimConfig = load(path)?;
    cfg.validate()?;
    Ok(cfg)
}
