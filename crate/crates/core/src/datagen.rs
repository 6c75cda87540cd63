//! Seeded simulators for the benchmark processes.
//!
//! - `Multi`: `y_t = x_t' beta + e_t`, `x_t, beta ~ N(0, I_p)`, `||beta|| = 1`,
//!   with AR(1) errors `e_t = rho e_{t-1} + xi_t`, `xi_t ~ N(0, 1 - rho^2)`.
//! - `Rand`: random walk with drift, `y_t = drift + y_{t-1} + e_t`, features
//!   are the previous `lag` responses.
//! - `Network`: `k` nodes, node `i` sums `edge_weight * y_{t-1,j}` over a random
//!   neighbor set plus noise; features are the previous `lag` values of every
//!   node.
//!
//! Gaussian draws use [`Gaussian`] (Box-Muller over ChaCha8), so a seed
//! reproduces the same data on every platform.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Gaussian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    Multi,
    Rand,
    Network,
}

impl std::fmt::Display for SimKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SimKind::Multi => "multi",
            SimKind::Rand => "rand",
            SimKind::Network => "network",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub kind: SimKind,
    /// Training length `T`.
    pub train_len: usize,
    /// Test length `T1`.
    pub test_len: usize,
    /// Feature dimension (multi).
    pub p: usize,
    /// AR(1) coefficient of the errors (multi).
    pub rho: f64,
    /// Drift (rand).
    pub drift: f64,
    /// History length used as features (rand, network).
    pub lag: usize,
    /// Node count (network).
    pub nodes: usize,
    /// Common edge weight (network).
    pub edge_weight: f64,
    /// 0-based node whose series is the response (network).
    pub node: usize,
    /// Multiplies every innovation; 0 gives the noiseless process.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            kind: SimKind::Multi,
            train_len: 200,
            test_len: 200,
            p: 300,
            rho: 0.75,
            drift: 2.0,
            lag: 5,
            nodes: 10,
            edge_weight: 1.0,
            node: 0,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn multi() -> Self {
        Self::default()
    }

    pub fn rand() -> Self {
        Self {
            kind: SimKind::Rand,
            ..Self::default()
        }
    }

    pub fn network() -> Self {
        Self {
            kind: SimKind::Network,
            lag: 10,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_len == 0 || self.test_len == 0 {
            return Err(Error::InvalidArgument("train_len and test_len must be positive".into()));
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(Error::InvalidArgument(format!("noise_scale {}", self.noise_scale)));
        }
        match self.kind {
            SimKind::Multi => {
                if self.p == 0 {
                    return Err(Error::InvalidArgument("p must be at least 1".into()));
                }
                if !(0.0..1.0).contains(&self.rho) {
                    return Err(Error::InvalidArgument(format!("rho {} outside [0, 1)", self.rho)));
                }
            }
            SimKind::Rand | SimKind::Network => {
                if self.lag == 0 {
                    return Err(Error::InvalidArgument("lag must be at least 1".into()));
                }
                if self.lag >= self.train_len {
                    return Err(Error::InvalidArgument(format!(
                        "lag {} leaves no training rows",
                        self.lag
                    )));
                }
                if self.kind == SimKind::Network {
                    if self.nodes < 5 {
                        return Err(Error::InvalidArgument(format!(
                            "network needs at least 5 nodes, got {}",
                            self.nodes
                        )));
                    }
                    if self.node >= self.nodes {
                        return Err(Error::InvalidArgument(format!(
                            "response node {} outside 0..{}",
                            self.node, self.nodes
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn generate(cfg: &SimConfig) -> Result<Dataset> {
    match cfg.kind {
        SimKind::Multi => gen_multi(cfg),
        SimKind::Rand => gen_random_walk(cfg),
        SimKind::Network => gen_network(cfg),
    }
}

fn expect_kind(cfg: &SimConfig, kind: SimKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::InvalidArgument(format!("expected {kind} config, got {}", cfg.kind)));
    }
    cfg.validate()
}

/// Draw order: `beta`, then `x_1..x_n` row by row, then the innovations.
pub fn gen_multi(cfg: &SimConfig) -> Result<Dataset> {
    expect_kind(cfg, SimKind::Multi)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut g = Gaussian::new();
    let (n, p) = (cfg.train_len + cfg.test_len, cfg.p);

    let mut beta: Vec<f64> = (0..p).map(|_| g.sample(&mut rng)).collect();
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    beta.iter_mut().for_each(|b| *b /= norm);

    let features: Vec<f64> = (0..n * p).map(|_| g.sample(&mut rng)).collect();
    let errors = ar1_errors(n, cfg.rho, cfg.noise_scale, &mut rng, &mut g);
    let response = (0..n)
        .map(|t| {
            let row = &features[t * p..(t + 1) * p];
            row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + errors[t]
        })
        .collect();
    Dataset::new(features, response, p, cfg.train_len)
}

/// `e_0 = 0`, `e_t = rho e_{t-1} + xi_t` with `xi_t ~ N(0, 1 - rho^2)`.
pub fn ar1_errors<R: Rng + ?Sized>(n: usize, rho: f64, scale: f64, rng: &mut R, g: &mut Gaussian) -> Vec<f64> {
    let sd = (1.0 - rho * rho).sqrt() * scale;
    let mut prev = 0.0;
    (0..n)
        .map(|_| {
            prev = rho * prev + sd * g.sample(rng);
            prev
        })
        .collect()
}

/// The first `lag` steps only seed the history, so the dataset has
/// `train_len + test_len - lag` rows and `train_len - lag` training rows.
pub fn gen_random_walk(cfg: &SimConfig) -> Result<Dataset> {
    expect_kind(cfg, SimKind::Rand)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut g = Gaussian::new();
    let n = cfg.train_len + cfg.test_len;
    // series[0] is y_0 = 0
    let mut series = Vec::with_capacity(n + 1);
    series.push(0.0);
    for t in 1..=n {
        let y = cfg.drift + series[t - 1] + cfg.noise_scale * g.sample(&mut rng);
        series.push(y);
    }
    let d = cfg.lag;
    let mut features = Vec::with_capacity((n - d) * d);
    let mut response = Vec::with_capacity(n - d);
    for t in d + 1..=n {
        features.extend((1..=d).map(|l| series[t - l]));
        response.push(series[t]);
    }
    Dataset::new(features, response, d, cfg.train_len - d)
}

/// Neighbor sets of the network process: node `i` gets `N_i` distinct
/// neighbors (possibly itself), `N_i` uniform on `[ceil(0.2k), floor(0.4k)]`.
pub fn draw_neighbors<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let lo = (0.2 * k as f64).ceil() as usize;
    let hi = ((0.4 * k as f64).floor() as usize).max(lo);
    (0..k)
        .map(|_| {
            let count = rng.random_range(lo..=hi);
            let mut nb = sample(rng, k, count).into_vec();
            nb.sort_unstable();
            nb
        })
        .collect()
}

/// Draw order: neighbor sets, `y_0`, then innovations step by step (one
/// independent draw per node per step). Features of row `t` stack
/// `y_{t-lag}, ..., y_{t-1}`, each a block of all `k` nodes.
pub fn gen_network(cfg: &SimConfig) -> Result<Dataset> {
    expect_kind(cfg, SimKind::Network)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut g = Gaussian::new();
    let (k, n, d) = (cfg.nodes, cfg.train_len + cfg.test_len, cfg.lag);
    let neighbors = draw_neighbors(k, &mut rng);

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    states.push((0..k).map(|_| g.sample(&mut rng)).collect());
    for t in 1..=n {
        let prev = &states[t - 1];
        let next: Vec<f64> = neighbors
            .iter()
            .map(|nb| cfg.edge_weight * nb.iter().map(|&j| prev[j]).sum::<f64>())
            .collect();
        let next = next
            .into_iter()
            .map(|v| v + cfg.noise_scale * g.sample(&mut rng))
            .collect();
        states.push(next);
    }

    let mut features = Vec::with_capacity((n - d) * d * k);
    let mut response = Vec::with_capacity(n - d);
    for t in d + 1..=n {
        for l in (1..=d).rev() {
            features.extend_from_slice(&states[t - l]);
        }
        response.push(states[t][cfg.node]);
    }
    Dataset::new(features, response, d * k, cfg.train_len - d)
}
