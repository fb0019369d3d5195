//! Convergence studies: run a method over a list of Poisson ratios and mesh
//! levels, then report eigenfrequencies, orders and trend marks.

mod config;
mod methods;
mod report;

use rayon::prelude::*;

pub use config::{Domain, Format, Level, LevelPair, StudyConfig};
pub use methods::{Ecr, EigenMethod, LevelJob, LevelOutcome, MethodRegistry, WgDirect, WgTwoGrid};
pub use report::{format_cell_size, render, to_csv, to_markdown, CSV_HEADER};

use crate::eigen::{EigenSolverRegistry, SolveOptions, DEFAULT_SEED};
use crate::error::{Error, Result};

/// `log2((g1 - g2) / (g2 - g3))` for three consecutive levels, `None` when a
/// difference vanishes or the two differences disagree in sign.
pub fn compute_order(g1: f64, g2: f64, g3: f64) -> Option<f64> {
    let (d1, d2) = (g1 - g2, g2 - g3);
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    let order = (d1 / d2).log2();
    order.is_finite().then_some(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Increasing,
    Decreasing,
    NonMonotone,
}

impl Trend {
    pub fn mark(self) -> &'static str {
        match self {
            Trend::Increasing => "↗",
            Trend::Decreasing => "↘",
            Trend::NonMonotone => "non-monotone",
        }
    }
}

const TREND_RTOL: f64 = 1e-12;

/// Strict monotonicity with relative tolerance `1e-12`; `None` for fewer
/// than two values.
pub fn trend(values: &[f64]) -> Option<Trend> {
    if values.len() < 2 {
        return None;
    }
    let steps = || values.windows(2).map(|w| (w[1] - w[0], TREND_RTOL * w[0].abs().max(w[1].abs())));
    if steps().all(|(d, tol)| d > tol) {
        Some(Trend::Increasing)
    } else if steps().all(|(d, tol)| d < -tol) {
        Some(Trend::Decreasing)
    } else {
        Some(Trend::NonMonotone)
    }
}

#[derive(Debug, Clone)]
pub struct LevelRecord {
    pub index: usize,
    pub level: Level,
    /// The error text replaces the values when the cell failed.
    pub outcome: std::result::Result<LevelOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct NuBlock {
    pub nu: f64,
    pub levels: Vec<LevelRecord>,
    /// Order over the last three levels, per eigenvalue index.
    pub orders: Vec<Option<f64>>,
    pub trends: Vec<Option<Trend>>,
}

impl NuBlock {
    fn new(nu: f64, levels: Vec<LevelRecord>, m: usize) -> Self {
        let ok: Option<Vec<&LevelOutcome>> = levels.iter().map(|l| l.outcome.as_ref().ok()).collect();
        let series = |j: usize| -> Option<Vec<f64>> { ok.as_ref()?.iter().map(|o| o.gammas.get(j).copied()).collect() };
        let orders = (0..m)
            .map(|j| {
                let g = series(j)?;
                match g.len() {
                    n if n >= 3 => compute_order(g[n - 3], g[n - 2], g[n - 1]),
                    _ => None,
                }
            })
            .collect();
        let trends = (0..m)
            .map(|j| {
                let omegas: Vec<f64> = series(j)?.iter().map(|g| g.max(0.0).sqrt()).collect();
                trend(&omegas)
            })
            .collect();
        Self { nu, levels, orders, trends }
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    /// Whether `k` and `delta` apply to the method that ran.
    pub wg_params: bool,
    pub blocks: Vec<NuBlock>,
}

impl StudyResult {
    pub fn failures(&self) -> impl Iterator<Item = (f64, &LevelRecord, &str)> {
        self.blocks
            .iter()
            .flat_map(|b| b.levels.iter().filter_map(move |l| l.outcome.as_ref().err().map(|e| (b.nu, l, e.as_str()))))
    }

    pub fn has_failures(&self) -> bool {
        self.failures().next().is_some()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
    pub eigensolver: String,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: None, eigensolver: "lanczos".into(), seed: DEFAULT_SEED }
    }
}

/// Validates `config`, then runs every `(nu, level)` cell on a worker pool.
/// Configuration problems are returned as errors before any solve; solver
/// failures are recorded per cell.
pub fn run_study(config: &StudyConfig, options: &RunOptions) -> Result<StudyResult> {
    run_study_with(config, options, &MethodRegistry::with_builtins(), &EigenSolverRegistry::with_builtins())
}

pub fn run_study_with(
    config: &StudyConfig,
    options: &RunOptions,
    methods: &MethodRegistry,
    solvers: &EigenSolverRegistry,
) -> Result<StudyResult> {
    config.validate()?;
    let method = methods.get(&config.method)?;
    method.validate(config)?;
    let solver = solvers.get(&options.eigensolver).map_err(|e| Error::Configuration(e.to_string()))?;
    if options.threads == Some(0) {
        return Err(Error::config("thread count must be positive"));
    }

    let opts = SolveOptions { tol: config.tol, seed: options.seed };
    let jobs: Vec<(usize, usize)> =
        (0..config.nu.len()).flat_map(|v| (0..config.levels.len()).map(move |l| (v, l))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(v, l)| {
                let job = LevelJob {
                    config,
                    nu: config.nu[v],
                    index: l,
                    level: config.levels[l],
                    solver,
                    opts,
                };
                method.run_level(&job).map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let blocks = config
        .nu
        .iter()
        .map(|&nu| {
            let levels = config
                .levels
                .iter()
                .enumerate()
                .map(|(index, &level)| LevelRecord { index, level, outcome: outcomes.next().expect("one outcome per job") })
                .collect();
            NuBlock::new(nu, levels, config.m)
        })
        .collect();
    Ok(StudyResult { config: config.clone(), wg_params: method.uses_wg_params(), blocks })
}
