//! Seeded Monte Carlo experiments and their comparison with theory.
//!
//! Trial `t` of a run with master seed `s` samples with seed
//! [`split_seed`]`(s, t)` and nothing else, so observations do not depend on
//! how trials are scheduled. Trials run on the rayon pool and are collected
//! in trial order.
//!
//! Closeness to the predicted law is measured under the comonotone coupling:
//! sorted observations are paired with theoretical quantiles at levels
//! `(t + 0.5) / N`. This coupling minimizes displacement, so a tail that is
//! heavy under it is heavy under every coupling.

pub mod verify;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::statistics::{Data, OrderStatistics};
use thiserror::Error;

pub use crate::bigraph::split_seed;
use crate::bigraph::{sample_bipartite, side_size, GraphError, GraphModelParams};
use crate::reduction::{build_m, corank_pipeline, ReductionError};
use crate::sandpile::{is_cyclic, p_rank, SandpileError};
use crate::theory::{rank_pmf_theoretical, RankDistribution, TheoryError};

/// Largest graph (in vertices) the cyclicity experiment will hand to the
/// Smith normal form.
pub const SNF_VERTEX_GUARD: usize = 500;

/// Edge probabilities of the q-sweep.
pub const QSWEEP_VALUES: [f64; 5] = [0.2, 0.35, 0.5, 0.65, 0.8];

/// Sizes of the balanced-scaling run.
pub const BALANCED_SIZES: [usize; 3] = [50, 100, 200];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("graph has {vertices} vertices, above the Smith normal form guard of {limit}")]
    GuardExceeded { vertices: usize, limit: usize },
    #[error("no observations to compare")]
    EmptyInput,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sandpile(#[from] SandpileError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Prank,
    Cyclicity,
    MCorank,
    QSweep,
    BalancedScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub alpha: f64,
    pub q: f64,
    pub p: u64,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, n: usize, alpha: f64, q: f64, p: u64, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig { kind, n, alpha, q, p, trials, master_seed, output_path: None }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials < 1 {
            return Err(HarnessError::InvalidConfig("trials must be at least 1".into()));
        }
        if !crate::gfp::is_prime(self.p) || self.p >= crate::gfp::MAX_MODULUS {
            return Err(HarnessError::InvalidConfig(format!("p = {} is not a prime below 2^31", self.p)));
        }
        GraphModelParams::new(self.n, self.alpha, self.q, self.master_seed)
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    fn expect_kind(&self, kind: ExperimentKind) -> Result<(), HarnessError> {
        if self.kind != kind {
            return Err(HarnessError::InvalidConfig(format!("expected kind {kind:?}, got {:?}", self.kind)));
        }
        self.validate()
    }

    fn params(&self, trial: usize) -> GraphModelParams {
        GraphModelParams::new(self.n, self.alpha, self.q, split_seed(self.master_seed, trial as u64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q01: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonStats {
    /// `|empirical mean - theoretical mean|`.
    pub mean_gap: f64,
    /// L1 distance between the empirical and theoretical CDFs.
    pub wasserstein1: f64,
    /// `P(|X - Y| >= m)` for `m = 1..=10` under the comonotone coupling.
    pub quantile_coupling_tail: Vec<f64>,
    /// Negated least-squares slope of `ln tail(m)` against `m`, over the
    /// `m` with a nonzero tail; `None` with fewer than two such points.
    pub fitted_decay_rate: Option<f64>,
}

/// A 95% Wilson score interval for a proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub lower: f64,
    pub upper: f64,
}

impl WilsonInterval {
    pub fn new(successes: usize, trials: usize) -> Self {
        let z = Normal::standard().inverse_cdf(0.975);
        let n = trials as f64;
        let phat = successes as f64 / n;
        let denom = 1.0 + z * z / n;
        let centre = (phat + z * z / (2.0 * n)) / denom;
        let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        WilsonInterval { lower: (centre - half).max(0.0), upper: (centre + half).min(1.0) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: u32,
    pub version: String,
    pub config: ExperimentConfig,
    pub per_trial: Vec<u64>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
    pub quantiles: Quantiles,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wilson: Option<WilsonInterval>,
    /// For `m-corank` runs: whether the direct and Schur coranks agreed on
    /// every trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline_consistent: Option<bool>,
    pub wall_time_ms: u64,
}

impl ExperimentResult {
    fn summarize(config: &ExperimentConfig, per_trial: Vec<u64>, started: Instant) -> Self {
        let n = per_trial.len() as f64;
        let mean = per_trial.iter().sum::<u64>() as f64 / n;
        let variance = if per_trial.len() > 1 {
            per_trial.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut data = Data::new(per_trial.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let quantiles = Quantiles {
            q01: data.quantile(0.01),
            q25: data.quantile(0.25),
            q50: data.quantile(0.50),
            q75: data.quantile(0.75),
            q99: data.quantile(0.99),
        };
        let seeds = (0..per_trial.len()).map(|t| split_seed(config.master_seed, t as u64)).collect();
        ExperimentResult {
            schema: 1,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            per_trial,
            seeds,
            mean,
            variance,
            quantiles,
            comparison: None,
            wilson: None,
            pipeline_consistent: None,
            wall_time_ms: started.elapsed().as_millis() as u64,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialization cannot fail")
    }

    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        let mut f = File::create(path)?;
        f.write_all(self.to_json_string().as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Per-trial observations as CSV with columns `trial,seed,observation`.
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["trial", "seed", "observation"])?;
        for (t, (&seed, &obs)) in self.seeds.iter().zip(&self.per_trial).enumerate() {
            w.write_record([t.to_string(), seed.to_string(), obs.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_trials<F>(cfg: &ExperimentConfig, trial: F) -> Result<Vec<u64>, HarnessError>
where
    F: Fn(GraphModelParams) -> Result<u64, HarnessError> + Sync,
{
    (0..cfg.trials).into_par_iter().map(|t| trial(cfg.params(t))).collect()
}

/// p-rank of `G(n, alpha, q)` per trial, compared with the predicted law.
pub fn run_prank_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.expect_kind(ExperimentKind::Prank)?;
    prank_run(cfg)
}

fn prank_run(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    let started = Instant::now();
    let p = cfg.p;
    let per_trial = run_trials(cfg, |params| Ok(p_rank(&sample_bipartite(&params)?, p)? as u64))?;
    let dist = rank_pmf_theoretical(cfg.n as u64, cfg.alpha, p)?;
    let mut result = ExperimentResult::summarize(cfg, per_trial, started);
    result.comparison = Some(compare_to_theory(&result.per_trial, &dist)?);
    result.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

/// Cyclicity of the sandpile group per trial (1 = cyclic), with a Wilson
/// interval on the cyclic fraction.
pub fn run_cyclicity_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.expect_kind(ExperimentKind::Cyclicity)?;
    let vertices = cfg.n + side_size(cfg.n, cfg.alpha);
    if vertices > SNF_VERTEX_GUARD {
        return Err(HarnessError::GuardExceeded { vertices, limit: SNF_VERTEX_GUARD });
    }
    let started = Instant::now();
    let per_trial = run_trials(cfg, |params| Ok(u64::from(is_cyclic(&sample_bipartite(&params)?))))?;
    let cyclic = per_trial.iter().filter(|&&x| x == 1).count();
    let mut result = ExperimentResult::summarize(cfg, per_trial, started);
    result.wilson = Some(WilsonInterval::new(cyclic, cfg.trials));
    Ok(result)
}

/// Corank of the matrix `M` per trial, compared with the predicted law.
pub fn run_mcorank_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.expect_kind(ExperimentKind::MCorank)?;
    let started = Instant::now();
    let reports: Vec<_> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let m = build_m(cfg.n, cfg.alpha, cfg.q, cfg.p, split_seed(cfg.master_seed, t as u64))?;
            Ok(corank_pipeline(&m))
        })
        .collect::<Result<_, HarnessError>>()?;
    let consistent = reports.iter().all(|r| r.consistent());
    let per_trial = reports.iter().map(|r| r.corank_direct as u64).collect();
    let dist = rank_pmf_theoretical(cfg.n as u64, cfg.alpha, cfg.p)?;
    let mut result = ExperimentResult::summarize(cfg, per_trial, started);
    result.comparison = Some(compare_to_theory(&result.per_trial, &dist)?);
    result.pipeline_consistent = Some(consistent);
    result.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(result)
}

/// Distances between observed counts and a predicted law.
pub fn compare_to_theory(observations: &[u64], dist: &RankDistribution) -> Result<ComparisonStats, HarnessError> {
    if observations.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let n = observations.len();
    let mut sorted = observations.to_vec();
    sorted.sort_unstable();
    let mean = sorted.iter().sum::<u64>() as f64 / n as f64;
    let mean_gap = (mean - dist.mean()).abs();

    // both laws live on the integers, so the CDF gap is constant on [x, x+1)
    let top = sorted[n - 1].max(dist.max_rank());
    let mut below = 0;
    let mut wasserstein1 = 0.0;
    for x in 0..top {
        while below < n && sorted[below] <= x {
            below += 1;
        }
        wasserstein1 += (below as f64 / n as f64 - dist.cdf(x)).abs();
    }

    let gaps: Vec<u64> =
        sorted.iter().enumerate().map(|(t, &x)| x.abs_diff(dist.quantile((t as f64 + 0.5) / n as f64))).collect();
    let quantile_coupling_tail: Vec<f64> =
        (1..=10).map(|m| gaps.iter().filter(|&&g| g >= m).count() as f64 / n as f64).collect();

    let points: Vec<(f64, f64)> = quantile_coupling_tail
        .iter()
        .enumerate()
        .filter(|&(_, &t)| t > 0.0)
        .map(|(i, &t)| ((i + 1) as f64, t.ln()))
        .collect();
    let fitted_decay_rate = (points.len() >= 2).then(|| {
        let k = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        -sxy / sxx
    });

    Ok(ComparisonStats { mean_gap, wasserstein1, quantile_coupling_tail, fitted_decay_rate })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSweepTable {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    /// Largest difference between two row means.
    pub max_gap: f64,
}

/// The p-rank experiment repeated over [`QSWEEP_VALUES`].
pub fn run_qsweep(cfg: &ExperimentConfig) -> Result<QSweepTable, HarnessError> {
    run_qsweep_over(cfg, &QSWEEP_VALUES)
}

/// The p-rank experiment repeated over the given edge probabilities, with
/// the same master seed for each.
pub fn run_qsweep_over(cfg: &ExperimentConfig, qs: &[f64]) -> Result<QSweepTable, HarnessError> {
    cfg.expect_kind(ExperimentKind::QSweep)?;
    if qs.is_empty() {
        return Err(HarnessError::InvalidConfig("empty q list".into()));
    }
    let mut rows = Vec::with_capacity(qs.len());
    for &q in qs {
        let run = ExperimentConfig { kind: ExperimentKind::Prank, q, ..cfg.clone() };
        run.validate()?;
        rows.push(SweepRow { q, mean: prank_run(&run)?.mean });
    }
    let hi = rows.iter().map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    Ok(QSweepTable { schema: 1, config: cfg.clone(), rows, max_gap: hi - lo })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub mean: f64,
    pub mean_over_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub rows: Vec<ScalingRow>,
    pub strictly_decreasing: bool,
}

/// Mean p-rank over `n` for balanced graphs (`alpha = 1`) at
/// [`BALANCED_SIZES`]; `cfg.n` is ignored.
pub fn run_balanced_scaling(cfg: &ExperimentConfig) -> Result<ScalingTable, HarnessError> {
    cfg.expect_kind(ExperimentKind::BalancedScaling)?;
    if cfg.alpha != 1.0 {
        return Err(HarnessError::InvalidConfig(format!("balanced scaling needs alpha = 1, got {}", cfg.alpha)));
    }
    let mut rows = Vec::new();
    for n in BALANCED_SIZES {
        let run = ExperimentConfig { kind: ExperimentKind::Prank, n, ..cfg.clone() };
        let mean = prank_run(&run)?.mean;
        rows.push(ScalingRow { n, mean, mean_over_n: mean / n as f64 });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].mean_over_n < w[0].mean_over_n);
    Ok(ScalingTable { schema: 1, config: cfg.clone(), rows, strictly_decreasing })
}
