//! Forecasting methods looked up by name.
//!
//! Built in: `pinn`, `nn` (the same networks trained without the ODE terms)
//! and `naive` (last observed value).

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::data::Dataset;
use crate::forecast::{PointForecast, Target};
use crate::neural::TrainConfig;
use crate::pinn::{predict_point, train, PinnConfig, PinnError, TrainingWindow};
use crate::scoring::{naive_forecast, ScoreError};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error(transparent)]
    Pinn(#[from] PinnError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("unknown forecaster `{0}` (known: {1})")]
    Unknown(String, String),
}

impl ForecastError {
    /// Worth retrying with another seed.
    pub fn is_divergence(&self) -> bool {
        matches!(self, ForecastError::Pinn(PinnError::DivergedLoss { .. }))
    }
}

/// Result of fitting one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome {
    pub points: Vec<PointForecast>,
    /// False when training ended with a loss above its starting value.
    pub converged: bool,
    pub final_loss: Option<f64>,
}

/// Produces point forecasts from the end of a training window.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;

    /// Fit on `window` and forecast `window.horizons` weeks past its last week.
    fn forecast(&self, dataset: &Dataset, window: &TrainingWindow, seed: u64) -> Result<WindowOutcome, ForecastError>;
}

#[derive(Debug, Clone)]
pub struct PinnForecaster {
    pub name: String,
    pub config: PinnConfig,
    pub train: TrainConfig,
}

impl PinnForecaster {
    pub fn new(config: PinnConfig, train: TrainConfig) -> Self {
        Self {
            name: "pinn".into(),
            config,
            train,
        }
    }

    /// The same model with the ODE terms switched off.
    pub fn ablated(config: PinnConfig, train: TrainConfig) -> Self {
        let mut config = config;
        config.weights.w_ode = 0.0;
        Self {
            name: "nn".into(),
            config,
            train,
        }
    }
}

impl Forecaster for PinnForecaster {
    fn name(&self) -> &str {
        &self.name
    }

    fn forecast(&self, dataset: &Dataset, window: &TrainingWindow, seed: u64) -> Result<WindowOutcome, ForecastError> {
        let cfg = TrainConfig { seed, ..self.train.clone() };
        let out = train(dataset, window, &self.config, &cfg)?;
        let points = predict_point(&out.model, window.last_week, &window.horizons)?;
        let start = out.loss_history.first().copied().unwrap_or(f64::INFINITY);
        Ok(WindowOutcome {
            points,
            converged: out.final_parts.total <= start,
            final_loss: Some(out.final_parts.total),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveForecaster;

impl Forecaster for NaiveForecaster {
    fn name(&self) -> &str {
        "naive"
    }

    fn forecast(&self, dataset: &Dataset, window: &TrainingWindow, _seed: u64) -> Result<WindowOutcome, ForecastError> {
        let mut points = Vec::with_capacity(3 * window.horizons.len());
        for target in Target::ALL {
            let series = dataset.raw_series(target.channel());
            for &h in &window.horizons {
                points.push(PointForecast {
                    target,
                    horizon: h,
                    origin_week: window.last_week,
                    value: naive_forecast(&series, window.last_week, h)?,
                });
            }
        }
        Ok(WindowOutcome {
            points,
            converged: true,
            final_loss: None,
        })
    }
}

#[derive(Clone, Default)]
pub struct ForecasterRegistry {
    entries: BTreeMap<String, Arc<dyn Forecaster>>,
}

impl ForecasterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins(config: &PinnConfig, train: &TrainConfig) -> Self {
        let mut r = Self::new();
        r.register(Arc::new(PinnForecaster::new(config.clone(), train.clone())));
        r.register(Arc::new(PinnForecaster::ablated(config.clone(), train.clone())));
        r.register(Arc::new(NaiveForecaster));
        r
    }

    /// Add or replace a method under its own name.
    pub fn register(&mut self, f: Arc<dyn Forecaster>) {
        self.entries.insert(f.name().to_string(), f);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Forecaster>, ForecastError> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| ForecastError::Unknown(name.into(), self.names().join(", ")))
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}
