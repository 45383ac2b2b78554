//! Rolling-origin backtests: one independently fitted model per origin week.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::forecast::{PointForecast, Target};
use crate::pinn::TrainingWindow;
use crate::quantile::{causal_quantiles, QuantileError, QuantileForecast};
use crate::registry::{ForecastError, Forecaster};
use crate::scoring::{build_report, ScoreError, ScoreReport};

/// Origins of the full-length study, for a 110-week dataset.
pub const PAPER_ORIGINS: (u32, u32) = (17, 89);
/// Trailing window lengths compared by [`window_length_study`].
pub const STUDY_LENGTHS: [u32; 6] = [4, 8, 12, 16, 20, 24];
/// First evaluated target week of the window-length study, for 110 weeks.
pub const STUDY_FIRST_TARGET: u32 = 48;

/// Added to a window's seed before its single retry.
const RETRY_SALT: u64 = 0x9E37_79B9;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    Config(String),
    #[error("origin {origin}: {source}")]
    Window {
        origin: u32,
        #[source]
        source: ForecastError,
    },
    #[error(transparent)]
    Quantile(#[from] QuantileError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub first_origin: u32,
    pub last_origin: u32,
    pub horizons: Vec<u32>,
    /// Train on only the most recent `n` weeks; `None` uses all history.
    pub window_length: Option<u32>,
    pub workers: usize,
    /// Window at origin `o` trains with seed `seed + o`.
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            first_origin: PAPER_ORIGINS.0,
            last_origin: PAPER_ORIGINS.1,
            horizons: vec![1, 2, 3, 4],
            window_length: None,
            workers: 1,
            seed: 0,
        }
    }
}

/// Origins scaled from the 110-week layout to a dataset of `weeks` weeks,
/// keeping four forecast weeks inside the data.
pub fn scaled_origins(weeks: u32) -> (u32, u32) {
    let scale = |w: u32| (w as u64 * weeks as u64 / 110) as u32;
    let first = scale(PAPER_ORIGINS.0).max(4);
    let last = scale(PAPER_ORIGINS.1).min(weeks.saturating_sub(4)).max(first);
    (first, last)
}

impl BacktestConfig {
    pub fn origins(&self) -> std::ops::RangeInclusive<u32> {
        self.first_origin..=self.last_origin
    }

    /// Training window ending at `origin`.
    pub fn window(&self, origin: u32) -> Result<TrainingWindow, BacktestError> {
        let first = match self.window_length {
            Some(n) => origin.saturating_sub(n.saturating_sub(1)).max(1),
            None => 1,
        };
        TrainingWindow::with_horizons(first, origin, self.horizons.clone())
            .map_err(|e| BacktestError::Config(format!("origin {origin}: {e}")))
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<(), BacktestError> {
        if self.first_origin > self.last_origin {
            return Err(BacktestError::Config(format!(
                "first origin {} after last origin {}",
                self.first_origin, self.last_origin
            )));
        }
        if self.last_origin > dataset.weeks() {
            return Err(BacktestError::Config(format!(
                "last origin {} beyond the data ({} weeks)",
                self.last_origin,
                dataset.weeks()
            )));
        }
        if self.workers == 0 {
            return Err(BacktestError::Config("workers must be >= 1".into()));
        }
        if self.window_length.is_some_and(|n| n < 4) {
            return Err(BacktestError::Config("window length must be >= 4 weeks".into()));
        }
        for o in self.origins() {
            self.window(o)?;
        }
        Ok(())
    }
}

/// Forecasts of one origin.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub origin_week: u32,
    pub seed: u64,
    pub converged: bool,
    pub retried: bool,
    pub points: Vec<PointForecast>,
}

/// An origin that failed on both attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFailure {
    pub origin_week: u32,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub method: String,
    pub records: Vec<WindowRecord>,
    pub failures: Vec<WindowFailure>,
}

impl BacktestResult {
    pub fn points(&self) -> Vec<PointForecast> {
        self.records.iter().flat_map(|r| r.points.iter().copied()).collect()
    }

    pub fn quantiles(&self, truth: &Dataset) -> Result<Vec<QuantileForecast>, BacktestError> {
        Ok(causal_quantiles(&self.points(), truth)?)
    }
}

fn run_window(
    forecaster: &dyn Forecaster,
    dataset: &Dataset,
    cfg: &BacktestConfig,
    origin: u32,
) -> Result<Result<WindowRecord, WindowFailure>, BacktestError> {
    let window = cfg.window(origin)?;
    let seed = cfg.seed.wrapping_add(origin as u64);
    let record = |seed, retried, out: crate::registry::WindowOutcome| WindowRecord {
        origin_week: origin,
        seed,
        converged: out.converged,
        retried,
        points: out.points,
    };
    match forecaster.forecast(dataset, &window, seed) {
        Ok(out) => Ok(Ok(record(seed, false, out))),
        Err(e) if e.is_divergence() => {
            let salted = seed.wrapping_add(RETRY_SALT);
            match forecaster.forecast(dataset, &window, salted) {
                Ok(out) => Ok(Ok(record(salted, true, out))),
                Err(e) if e.is_divergence() => Ok(Err(WindowFailure {
                    origin_week: origin,
                    seed: salted,
                    error: e.to_string(),
                })),
                Err(source) => Err(BacktestError::Window { origin, source }),
            }
        }
        Err(source) => Err(BacktestError::Window { origin, source }),
    }
}

/// Fit `forecaster` at every origin in `cfg`, in parallel over `cfg.workers`
/// threads. Diverged windows are retried once with a salted seed and then
/// recorded as failures; any other error aborts the run.
pub fn rolling_backtest(
    forecaster: &dyn Forecaster,
    dataset: &Dataset,
    cfg: &BacktestConfig,
) -> Result<BacktestResult, BacktestError> {
    cfg.validate(dataset)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BacktestError::Config(e.to_string()))?;
    let origins: Vec<u32> = cfg.origins().collect();
    let outcomes: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        origins
            .par_iter()
            .map(|&o| run_window(forecaster, dataset, cfg, o))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut result = BacktestResult {
        method: forecaster.name().to_string(),
        records: Vec::new(),
        failures: Vec::new(),
    };
    for o in outcomes {
        match o {
            Ok(r) => result.records.push(r),
            Err(f) => result.failures.push(f),
        }
    }
    Ok(result)
}

/// One score table per trailing window length, each labelled `len{n}`.
pub fn window_length_study(
    forecaster: &dyn Forecaster,
    dataset: &Dataset,
    lengths: &[u32],
    cfg: &BacktestConfig,
) -> Result<Vec<(u32, BacktestResult, ScoreReport)>, BacktestError> {
    lengths
        .iter()
        .map(|&n| {
            let run_cfg = BacktestConfig {
                window_length: Some(n),
                ..cfg.clone()
            };
            let mut result = rolling_backtest(forecaster, dataset, &run_cfg)?;
            result.method = format!("len{n}");
            let q = result.quantiles(dataset)?;
            let report = build_report(&[(result.method.clone(), q)], dataset)?;
            Ok((n, result, report))
        })
        .collect()
}

/// Origins for the window-length study: target weeks from week 48 of 110
/// (scaled) to the end of the data.
pub fn study_origins(weeks: u32) -> (u32, u32) {
    let first = ((STUDY_FIRST_TARGET - 1) as u64 * weeks as u64 / 110) as u32;
    (first.max(4), weeks.saturating_sub(1).max(first.max(4)))
}

/// One row of the forecasts CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub origin_week: u32,
    pub target: Target,
    pub horizon: u32,
    pub value: f64,
    pub seed: u64,
    pub converged: bool,
}

pub fn forecast_rows(result: &BacktestResult) -> Vec<ForecastRow> {
    let mut rows: Vec<ForecastRow> = result
        .records
        .iter()
        .flat_map(|r| {
            r.points.iter().map(|p| ForecastRow {
                origin_week: p.origin_week,
                target: p.target,
                horizon: p.horizon,
                value: p.value,
                seed: r.seed,
                converged: r.converged,
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.origin_week, r.target, r.horizon));
    rows
}

pub fn write_forecasts_csv(path: &Path, result: &BacktestResult) -> Result<(), BacktestError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in forecast_rows(result) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_forecasts_csv(path: &Path) -> Result<Vec<ForecastRow>, BacktestError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<_>, _>>()?)
}

pub fn rows_to_points(rows: &[ForecastRow]) -> Vec<PointForecast> {
    rows.iter()
        .map(|r| PointForecast {
            target: r.target,
            horizon: r.horizon,
            origin_week: r.origin_week,
            value: r.value,
        })
        .collect()
}
