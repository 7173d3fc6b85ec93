//! Ensemble experiments, scaling fits and the FPGA resource model.
//!
//! Instance and initial-condition seeds for run `i` at size `N` are
//! `derive_seed(base_seed, [N, i, 0])` and `derive_seed(base_seed, [N, i, 1])`
//! (see [`crate::rng`]), so any subset of runs can be reproduced in isolation
//! and workers never need to coordinate.

use std::io::Read;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barthel::{self, GeneratorConfig, GeneratorError, Ratio, TypeProbs};
use crate::dynamics::{self, Params};
use crate::fixedpoint::{self, FixedError, FixedParams};
use crate::rng::derive_seed;
use crate::run::{EngineKind, RunResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("median of an empty set")]
    EmptyInput,
    #[error("power-law fit needs at least 2 distinct sizes, got {0}")]
    InsufficientPoints(usize),
    #[error("power-law fit needs positive values, got ({0}, {1})")]
    NonPositive(f64, f64),
    #[error("ensemble needs at least one size")]
    NoSizes,
    #[error("runs_per_size must be at least 1")]
    NoRuns,
    #[error("unknown export format `{0}` (expected csv or json)")]
    UnknownFormat(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Fixed(#[from] FixedError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: expected `N,median`, got `{text}`")]
    BadPoint { line: usize, text: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Lower median: element `(len - 1) / 2` of the sorted values.
pub fn median<T: PartialOrd + Copy>(values: &[T]) -> Result<T, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values must be comparable"));
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// `median ≈ prefactor · N^exponent`, from least squares in log–log space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Standard error of the slope; `None` with only two points.
    pub exponent_stderr: Option<f64>,
    pub points: usize,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, HarnessError> {
    if let Some(&(n, y)) = points.iter().find(|(n, y)| !(*n > 0.0 && *y > 0.0)) {
        return Err(HarnessError::NonPositive(n, y));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(HarnessError::InsufficientPoints(distinct.len()));
    }

    let k = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, y)| (n.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (points.len() > 2).then(|| {
        let ssr: f64 = logs
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (ssr / (k - 2.0) / sxx).sqrt()
    });
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        exponent_stderr: stderr,
        points: points.len(),
    })
}

/// Reads `N,median` rows; a non-numeric first row is treated as a header.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed = (rec.len() >= 2)
            .then(|| Some((rec[0].parse::<f64>().ok()?, rec[1].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some(p) => points.push(p),
            None if i == 0 => continue,
            None => {
                return Err(HarnessError::BadPoint {
                    line: i + 1,
                    text: rec.iter().collect::<Vec<_>>().join(","),
                })
            }
        }
    }
    Ok(points)
}

pub const VCU118_LUTS: i64 = 1_182_240;
pub const VCU118_DSPS: i64 = 6_840;
pub const FPGA_STEP_NS: u64 = 96;
/// Smallest N for which the linear LUT fit is meaningful.
pub const LUT_FIT_MIN_N: usize = 40;

/// Linear FPGA resource projection for a fully parallel N-variable solver
/// at M/N = 4.3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub n_vars: usize,
    pub luts: i64,
    pub dsps: i64,
    pub fits_vcu118: bool,
    /// False below N = 40, where the LUT fit was not calibrated.
    pub in_domain: bool,
    pub projected_step_ns: u64,
}

impl ResourceEstimate {
    /// Projected FPGA time to solution for a given step count.
    pub fn projected_time(&self, steps: u64) -> Duration {
        projected_fpga_time(steps)
    }
}

pub fn estimate_resources(n: usize) -> ResourceEstimate {
    let luts = -204_557 + 9_559 * n as i64;
    let dsps = 43 * n as i64;
    ResourceEstimate {
        n_vars: n,
        luts,
        dsps,
        fits_vcu118: luts <= VCU118_LUTS && dsps <= VCU118_DSPS,
        in_domain: n >= LUT_FIT_MIN_N,
        projected_step_ns: FPGA_STEP_NS,
    }
}

pub fn projected_fpga_time(steps: u64) -> Duration {
    Duration::from_nanos(steps.saturating_mul(FPGA_STEP_NS))
}

/// Everything needed to reproduce an ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub engine: EngineKind,
    pub sizes: Vec<usize>,
    pub runs_per_size: usize,
    pub base_seed: u64,
    pub ratio: Ratio,
    pub type_probs: TypeProbs,
    pub float_params: Params,
    pub fixed_params: FixedParams,
    /// Worker threads; results never depend on it.
    #[serde(skip, default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl EnsembleConfig {
    pub fn new(engine: EngineKind, sizes: Vec<usize>, runs_per_size: usize, base_seed: u64) -> Self {
        EnsembleConfig {
            engine,
            sizes,
            runs_per_size,
            base_seed,
            ratio: Ratio::DEFAULT,
            type_probs: barthel::default_type_probs(),
            float_params: Params::default(),
            fixed_params: FixedParams::default(),
            jobs: 1,
        }
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.float_params.max_steps = max_steps;
        self.fixed_params.max_steps = max_steps;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    pub fn instance_seed(&self, n: usize, index: usize) -> u64 {
        derive_seed(self.base_seed, &[n as u64, index as u64, 0])
    }

    pub fn run_seed(&self, n: usize, index: usize) -> u64 {
        derive_seed(self.base_seed, &[n as u64, index as u64, 1])
    }

    pub fn generator(&self, n: usize, index: usize) -> GeneratorConfig {
        GeneratorConfig {
            num_vars: n,
            ratio: self.ratio,
            seed: self.instance_seed(n, index),
            type_probs: self.type_probs,
        }
    }
}

/// Statistics for one problem size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub num_vars: usize,
    pub num_clauses: usize,
    pub runs: usize,
    pub solved: usize,
    pub unsolved_fraction: f64,
    /// Lower median over solved runs only.
    pub median_steps: Option<u64>,
    pub median_wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: EnsembleConfig,
    pub sizes: Vec<SizeSummary>,
    /// Fit of median steps against N over sizes with a positive median.
    pub fit: Option<PowerLawFit>,
    /// Sizes left out of the fit (nothing solved, or a zero median).
    pub excluded_sizes: Vec<usize>,
    pub runs: Vec<RunResult>,
}

/// Solves one harness instance with the configured engine.
pub fn run_one(cfg: &EnsembleConfig, n: usize, index: usize) -> Result<RunResult, HarnessError> {
    let inst = barthel::generate(&cfg.generator(n, index))?;
    let seed = cfg.run_seed(n, index);
    let mut result = match cfg.engine {
        EngineKind::Float => dynamics::solve(&inst.formula, &cfg.float_params, seed),
        EngineKind::Fixed => fixedpoint::solve_q14(&inst.formula, &cfg.fixed_params, seed)?,
    };
    result.instance_seed = Some(inst.seed);
    Ok(result)
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<ScalingReport, HarnessError> {
    if cfg.sizes.is_empty() {
        return Err(HarnessError::NoSizes);
    }
    if cfg.runs_per_size == 0 {
        return Err(HarnessError::NoRuns);
    }
    let tasks: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.runs_per_size).map(move |i| (n, i)))
        .collect();

    // collect() keeps task order, so aggregation never sees completion order
    let runs: Vec<RunResult> = if cfg.jobs <= 1 {
        tasks
            .iter()
            .map(|&(n, i)| run_one(cfg, n, i))
            .collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        pool.install(|| {
            tasks
                .par_iter()
                .map(|&(n, i)| run_one(cfg, n, i))
                .collect::<Result<_, _>>()
        })?
    };

    let mut sizes = Vec::with_capacity(cfg.sizes.len());
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (k, &n) in cfg.sizes.iter().enumerate() {
        let chunk = &runs[k * cfg.runs_per_size..(k + 1) * cfg.runs_per_size];
        let solved: Vec<&RunResult> = chunk.iter().filter(|r| r.solved).collect();
        let steps: Vec<u64> = solved.iter().map(|r| r.steps).collect();
        let walls: Vec<f64> = solved.iter().map(|r| r.wall_time_s).collect();
        let median_steps = median(&steps).ok();
        match median_steps {
            Some(s) if s > 0 => points.push((n as f64, s as f64)),
            _ => excluded.push(n),
        }
        sizes.push(SizeSummary {
            num_vars: n,
            num_clauses: cfg.ratio.clauses_for(n),
            runs: chunk.len(),
            solved: solved.len(),
            unsolved_fraction: 1.0 - solved.len() as f64 / chunk.len() as f64,
            median_steps,
            median_wall_time_s: median(&walls).ok(),
        });
    }
    let fit = fit_power_law(&points).ok();

    Ok(ScalingReport {
        config: cfg.clone(),
        sizes,
        fit,
        excluded_sizes: excluded,
        runs,
    })
}

/// Ratio of the largest to the smallest wall time per step over runs with at
/// least `min_steps` steps; `None` if fewer than two runs qualify.
pub fn step_time_spread(runs: &[RunResult], min_steps: u64) -> Option<f64> {
    let rates: Vec<f64> = runs
        .iter()
        .filter(|r| r.steps >= min_steps.max(1))
        .map(|r| r.wall_time_s / r.steps as f64)
        .collect();
    if rates.len() < 2 {
        return None;
    }
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(0.0, f64::max);
    Some(hi / lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => Err(HarnessError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Serialize)]
struct CsvRow {
    engine: EngineKind,
    #[serde(rename = "N")]
    num_vars: usize,
    instance_seed: Option<u64>,
    solved: bool,
    steps: u64,
    wall_time_s: f64,
}

const CSV_HEADER: [&str; 6] = ["engine", "N", "instance_seed", "solved", "steps", "wall_time_s"];

/// Writes one CSV row per run, or the whole report as JSON.
pub fn export(report: &ScalingReport, format: ExportFormat) -> Result<Vec<u8>, HarnessError> {
    match format {
        ExportFormat::Json => {
            let mut buf = serde_json::to_vec_pretty(report)?;
            buf.push(b'\n');
            Ok(buf)
        }
        ExportFormat::Csv => export_runs_csv(&report.runs),
    }
}

pub fn export_runs_csv(runs: &[RunResult]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in runs {
        w.serialize(CsvRow {
            engine: r.engine,
            num_vars: r.num_vars,
            instance_seed: r.instance_seed,
            solved: r.solved,
            steps: r.steps,
            wall_time_s: r.wall_time_s,
        })?;
    }
    w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))
}
