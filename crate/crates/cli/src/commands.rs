use std::path::{Path, PathBuf};

use enpi::eval::{alpha_grid, run_trials, DataSource};
use enpi::{Dataset, ExperimentReport, Method};
use log::{info, warn};

use crate::config::{self, RunConfig};
use crate::error::{CliError, Result};
use crate::io;

/// Where a command's main output goes.
pub enum Sink {
    File(PathBuf),
    Stdout,
}

impl Sink {
    pub fn pick(flag: Option<PathBuf>, config: Option<PathBuf>) -> Self {
        flag.or(config).map_or(Sink::Stdout, Sink::File)
    }

    pub fn write(&self, text: &str) -> Result<()> {
        match self {
            Sink::File(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
            Sink::Stdout => {
                use std::io::Write;
                std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))
            }
        }
    }

    pub fn is_stdout(&self) -> bool {
        matches!(self, Sink::Stdout)
    }
}

pub fn generate(config_path: &Path, out: Sink, seed: Option<u64>) -> Result<()> {
    let mut sim = config::load_sim(config_path)?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    let data = enpi::datagen::generate(&sim)?;
    out.write(&io::dataset_csv(&data))?;
    info!("generated {} rows with {} features", data.len(), data.n_features());
    Ok(())
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

fn prepare(config_path: &Path, overrides: &Overrides) -> Result<(RunConfig, DataSource, String)> {
    let mut cfg = config::load_run(config_path)?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(n) = overrides.trials {
        cfg.n_trials = n;
    }
    cfg.validate()?;
    let (source, name) = match (&cfg.dataset, &cfg.simulation) {
        (Some(path), _) => {
            let data = io::read_dataset_file(path)?;
            let train = Dataset::train_len_for_fraction(data.len(), cfg.train_fraction)?;
            let data = data.with_train_len(train)?;
            if data.test_len() == 0 {
                return Err(CliError::Config(format!(
                    "train_fraction {} leaves no test rows",
                    cfg.train_fraction
                )));
            }
            let name = path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
            (DataSource::Fixed(data), name)
        }
        (None, Some(path)) => {
            let sim = config::load_sim(path)?;
            let name = sim.kind.to_string();
            (DataSource::Simulated(sim), name)
        }
        (None, None) => unreachable!("validated"),
    };
    Ok((cfg, source, name))
}

fn trials(cfg: &RunConfig, source: &DataSource, method: Method, alpha: f64) -> Result<Vec<Vec<enpi::EvalRecord>>> {
    Ok(run_trials(
        method,
        source,
        &cfg.regressor_spec(),
        &cfg.ensemble(),
        cfg.weights(),
        alpha,
        cfg.n_trials,
        cfg.seed,
    )?)
}

pub fn run(config_path: &Path, out: Option<PathBuf>, overrides: &Overrides) -> Result<()> {
    let (cfg, source, name) = prepare(config_path, overrides)?;
    let sink = Sink::pick(out, cfg.output.clone());
    let results = trials(&cfg, &source, cfg.method, cfg.alpha)?;
    let mut text = format!("{}\n", io::INTERVAL_HEADER);
    for (k, records) in results.iter().enumerate() {
        io::interval_rows(&mut text, k, records);
    }
    sink.write(&text)?;
    let report = ExperimentReport::from_trials(
        &cfg.method.to_string(),
        &cfg.regressor.to_string(),
        &name,
        cfg.alpha,
        &results,
    )?;
    let summary = format!(
        "{} {} {} alpha {} trials {}: coverage {:.4} width {:.4} winkler {:.4}",
        report.method,
        report.regressor,
        report.dataset,
        report.alpha,
        report.n_trials,
        report.coverage_mean,
        report.width_mean,
        report.winkler_mean
    );
    if sink.is_stdout() {
        eprintln!("{summary}");
    } else {
        println!("{summary}");
    }
    Ok(())
}

pub fn sweep(config_path: &Path, out: Option<PathBuf>, overrides: &Overrides) -> Result<()> {
    let (cfg, source, name) = prepare(config_path, overrides)?;
    let sink = Sink::pick(out, cfg.output.clone());
    let alphas = cfg.alphas.clone().unwrap_or_else(|| alpha_grid(10));
    let methods = cfg.methods();
    let mut text = format!("{}\n", io::REPORT_HEADER);
    let mut by_method: Vec<Vec<(f64, f64)>> = vec![Vec::new(); methods.len()];
    for &alpha in &alphas {
        for (m, &method) in methods.iter().enumerate() {
            let results = trials(&cfg, &source, method, alpha)?;
            let report = ExperimentReport::from_trials(
                &method.to_string(),
                &cfg.regressor.to_string(),
                &name,
                alpha,
                &results,
            )?;
            by_method[m].push((alpha, report.coverage_mean));
            io::report_row(&mut text, &report);
        }
    }
    flag_non_monotone(&methods, &mut by_method);
    sink.write(&text)
}

/// Coverage should fall as alpha grows; reports reversals larger than 0.02.
fn flag_non_monotone(methods: &[Method], by_method: &mut [Vec<(f64, f64)>]) {
    for (method, points) in methods.iter().zip(by_method) {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[1].1 > w[0].1 + 0.02 {
                warn!(
                    "{method}: coverage rises from {:.4} at alpha {} to {:.4} at alpha {}",
                    w[0].1, w[0].0, w[1].1, w[1].0
                );
            }
        }
    }
}

pub fn eval(files: &[PathBuf], alpha: f64, out: Option<PathBuf>) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    let mut text = format!("{}\n", io::REPORT_HEADER);
    for path in files {
        let content = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let trials = io::read_intervals(&content, alpha).map_err(|e| match e {
            CliError::Csv(m) => CliError::Csv(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let name = path.file_stem().map_or("intervals".into(), |s| s.to_string_lossy().into_owned());
        let report = ExperimentReport::from_trials(&name, "", "", alpha, &trials)?;
        io::report_row(&mut text, &report);
    }
    Sink::pick(out, None).write(&text)
}
