//! Gaussian quantile forecasts around point forecasts, and the forecast hub
//! CSV layout.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::forecast::{PointForecast, Target};

/// The 23 forecast hub quantile levels.
pub const HUB_LEVELS: [f64; 23] = [
    0.01, 0.025, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9,
    0.95, 0.975, 0.99,
];

/// Index of the median in [`HUB_LEVELS`].
pub const MEDIAN_INDEX: usize = 11;

/// Fraction of the point forecast used as sigma when no errors exist yet.
pub const COLD_START_FRACTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum QuantileError {
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("sigma {0} must be finite and >= 0")]
    InvalidSigma(f64),
    #[error("{path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("hub export needs the dataset start date")]
    MissingStartDate,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Standard normal quantile, Wichura's AS241 (PPND16).
#[allow(clippy::excessive_precision)]
pub fn inverse_normal_cdf(p: f64) -> Result<f64, QuantileError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QuantileError::InvalidProbability(p));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return Ok(q * num / den);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966)
            * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
            + 1.8463183175100546818e-5)
            * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    Ok(if q < 0.0 { -z } else { z })
}

pub fn gaussian_quantile(mu: f64, sigma: f64, p: f64) -> Result<f64, QuantileError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(QuantileError::InvalidSigma(sigma));
    }
    let z = inverse_normal_cdf(p)?;
    if sigma == 0.0 {
        return Ok(mu);
    }
    Ok(mu + sigma * z)
}

/// Signed errors (forecast − observed) in original units, keyed by target
/// and horizon, each tagged with the week it forecast.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorHistory {
    errors: BTreeMap<(Target, u32), Vec<(u32, f64)>>,
}

impl ErrorHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record an error. Non-finite errors are ignored.
    pub fn push(&mut self, target: Target, horizon: u32, target_week: u32, error: f64) {
        if error.is_finite() {
            self.errors.entry((target, horizon)).or_default().push((target_week, error));
        }
    }

    pub fn errors(&self, target: Target, horizon: u32) -> Vec<f64> {
        self.errors
            .get(&(target, horizon))
            .map(|v| v.iter().map(|e| e.1).collect())
            .unwrap_or_default()
    }

    /// Only the errors whose target week had been observed by `week`.
    pub fn known_at(&self, week: u32) -> ErrorHistory {
        let errors = self
            .errors
            .iter()
            .map(|(k, v)| (*k, v.iter().copied().filter(|e| e.0 <= week).collect::<Vec<_>>()))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        ErrorHistory { errors }
    }

    /// Errors of `points` against the dataset's raw values, skipping weeks
    /// without truth.
    pub fn from_points(points: &[PointForecast], truth: &Dataset) -> Self {
        let mut h = Self::new();
        for p in points {
            if let Some(y) = truth.raw_value(p.target.channel(), p.target_week()) {
                h.push(p.target, p.horizon, p.target_week(), p.value - y);
            }
        }
        h
    }
}

/// Population standard deviation of the stored errors. With one error its
/// magnitude is used; with none, a tenth of `|mu|`.
pub fn estimate_sigma(history: &ErrorHistory, target: Target, horizon: u32, mu: f64) -> f64 {
    let Some(v) = history.errors.get(&(target, horizon)).filter(|v| !v.is_empty()) else {
        return COLD_START_FRACTION * mu.abs();
    };
    if v.len() == 1 {
        return v[0].1.abs();
    }
    let n = v.len() as f64;
    let mean = v.iter().map(|e| e.1).sum::<f64>() / n;
    let var = v.iter().map(|e| (e.1 - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    pub target: Target,
    pub horizon: u32,
    pub origin_week: u32,
    pub mu: f64,
    pub sigma: f64,
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantileForecast {
    pub fn target_week(&self) -> u32 {
        self.origin_week + self.horizon
    }

    /// Value at `level`, matched to 1e-9.
    pub fn at(&self, level: f64) -> Option<f64> {
        self.levels
            .iter()
            .position(|l| (l - level).abs() < 1e-9)
            .map(|i| self.values[i])
    }

    pub fn median(&self) -> Option<f64> {
        self.at(0.5)
    }
}

pub fn build_quantile_forecast(point: &PointForecast, sigma: f64) -> Result<QuantileForecast, QuantileError> {
    let values = HUB_LEVELS
        .iter()
        .map(|&p| gaussian_quantile(point.value, sigma, p).map(|v| v.max(0.0)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuantileForecast {
        target: point.target,
        horizon: point.horizon,
        origin_week: point.origin_week,
        mu: point.value,
        sigma,
        levels: HUB_LEVELS.to_vec(),
        values,
    })
}

/// Quantile forecasts for every point, each using only the errors of earlier
/// forecasts whose target week is at or before its origin.
pub fn causal_quantiles(points: &[PointForecast], truth: &Dataset) -> Result<Vec<QuantileForecast>, QuantileError> {
    let full = ErrorHistory::from_points(points, truth);
    points
        .iter()
        .map(|p| {
            let known = full.known_at(p.origin_week);
            build_quantile_forecast(p, estimate_sigma(&known, p.target, p.horizon, p.value))
        })
        .collect()
}

/// One row of a forecast hub submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubRow {
    pub forecast_date: NaiveDate,
    pub target: String,
    pub target_end_date: NaiveDate,
    #[serde(rename = "type")]
    pub kind: String,
    pub quantile: Option<f64>,
    pub value: f64,
}

pub fn hub_target(target: Target, horizon: u32) -> String {
    format!("{horizon} wk ahead inc {}", target.hub_noun())
}

fn parse_hub_target(s: &str) -> Option<(Target, u32)> {
    let (h, rest) = s.split_once(" wk ahead inc ")?;
    let target = Target::ALL.into_iter().find(|t| t.hub_noun() == rest)?;
    Some((target, h.parse().ok()?))
}

/// Forecasts are made the day after the origin week ends and target the
/// last day of week `origin + h`.
fn hub_dates(start: NaiveDate, origin: u32, horizon: u32) -> (NaiveDate, NaiveDate) {
    let forecast_date = start + Days::new(7 * origin as u64);
    let end = start + Days::new(7 * (origin + horizon) as u64 - 1);
    (forecast_date, end)
}

pub fn to_hub_rows(forecasts: &[QuantileForecast], start: NaiveDate) -> Vec<HubRow> {
    let mut rows = Vec::with_capacity(forecasts.len() * (HUB_LEVELS.len() + 1));
    for q in forecasts {
        let (forecast_date, target_end_date) = hub_dates(start, q.origin_week, q.horizon);
        let target = hub_target(q.target, q.horizon);
        rows.push(HubRow {
            forecast_date,
            target: target.clone(),
            target_end_date,
            kind: "point".into(),
            quantile: None,
            value: q.mu.max(0.0),
        });
        for (l, v) in q.levels.iter().zip(&q.values) {
            rows.push(HubRow {
                forecast_date,
                target: target.clone(),
                target_end_date,
                kind: "quantile".into(),
                quantile: Some(*l),
                value: *v,
            });
        }
    }
    rows
}

pub fn write_hub_csv(path: &Path, forecasts: &[QuantileForecast], start: NaiveDate) -> Result<(), QuantileError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in to_hub_rows(forecasts, start) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a hub file back into quantile forecasts. Point rows supply `mu`;
/// without one the median is used. `sigma` is not stored in the format and
/// comes back as NaN.
pub fn read_hub_csv(path: &Path, start: NaiveDate) -> Result<Vec<QuantileForecast>, QuantileError> {
    let shown = path.display().to_string();
    let schema = |msg: String| QuantileError::Schema {
        path: shown.clone(),
        msg,
    };
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let want = ["forecast_date", "target", "target_end_date", "type", "quantile", "value"];
    if header != want {
        return Err(schema(format!("expected header {}, found {}", want.join(","), header.join(","))));
    }
    type Key = (u32, Target, u32);
    // point value, then (level, value) pairs
    type Group = (Option<f64>, Vec<(f64, f64)>);
    let mut groups: BTreeMap<Key, Group> = BTreeMap::new();
    for row in r.deserialize() {
        let row: HubRow = row?;
        let (target, horizon) =
            parse_hub_target(&row.target).ok_or_else(|| schema(format!("unknown target `{}`", row.target)))?;
        let days = (row.forecast_date - start).num_days();
        if days < 0 || days % 7 != 0 {
            return Err(schema(format!("forecast_date {} is not a week boundary", row.forecast_date)));
        }
        let origin = (days / 7) as u32;
        if hub_dates(start, origin, horizon).1 != row.target_end_date {
            return Err(schema(format!("target_end_date {} inconsistent with target", row.target_end_date)));
        }
        let entry = groups.entry((origin, target, horizon)).or_default();
        match (row.kind.as_str(), row.quantile) {
            ("point", _) => entry.0 = Some(row.value),
            ("quantile", Some(q)) => entry.1.push((q, row.value)),
            (k, _) => return Err(schema(format!("bad row type `{k}`"))),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((origin_week, target, horizon), (point, mut qs)) in groups {
        qs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let levels: Vec<f64> = qs.iter().map(|q| q.0).collect();
        let values: Vec<f64> = qs.iter().map(|q| q.1).collect();
        let mut q = QuantileForecast {
            target,
            horizon,
            origin_week,
            mu: f64::NAN,
            sigma: f64::NAN,
            levels,
            values,
        };
        q.mu = match point.or_else(|| q.median()) {
            Some(m) => m,
            None => return Err(schema(format!("{target} h{horizon} origin {origin_week}: no point or median"))),
        };
        out.push(q);
    }
    out.sort_by_key(|q| (q.origin_week, q.target, q.horizon));
    Ok(out)
}
