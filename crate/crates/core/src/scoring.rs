//! Point and interval scores, and the per-method comparison report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, WeeklySeries};
use crate::forecast::{PointForecast, Target};
use crate::quantile::{causal_quantiles, QuantileError, QuantileForecast};

/// Central interval miscoverage levels paired with the hub quantiles.
pub const WIS_ALPHAS: [f64; 11] = [0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Name under which the naive baseline appears in reports.
pub const NAIVE_METHOD: &str = "naive";

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("nothing to score")]
    Empty,
    #[error("naive MAE is zero; the evaluation set is degenerate")]
    ZeroNaiveMae,
    #[error("naive WIS is zero; the evaluation set is degenerate")]
    ZeroNaiveWis,
    #[error("interval lower {0} exceeds upper {1}")]
    InvalidInterval(f64, f64),
    #[error("alpha {0} outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("forecast lacks quantile level {0}")]
    MissingQuantileLevel(f64),
    #[error("week {week} outside the series (weeks {first}..={last})")]
    OutOfRange { week: i64, first: u32, last: u32 },
    #[error("{method} {target} horizon {horizon}: no week has truth and both forecasts")]
    EmptyCell { method: String, target: Target, horizon: u32 },
    #[error(transparent)]
    Quantile(#[from] QuantileError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn mae(predictions: &[f64], observations: &[f64]) -> Result<f64, ScoreError> {
    if predictions.len() != observations.len() {
        return Err(ScoreError::LengthMismatch(predictions.len(), observations.len()));
    }
    if predictions.is_empty() {
        return Err(ScoreError::Empty);
    }
    let sum: f64 = predictions.iter().zip(observations).map(|(p, y)| (p - y).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

/// The horizon-matched naive forecasts made at `origin_week`: weeks
/// `origin+1..=origin+horizon` receive the observed block
/// `origin-horizon+1..=origin`.
pub fn naive_block(series: &WeeklySeries, origin_week: u32, horizon: u32) -> Result<Vec<f64>, ScoreError> {
    let first = origin_week as i64 - horizon as i64 + 1;
    (first..=origin_week as i64)
        .map(|w| {
            u32::try_from(w)
                .ok()
                .and_then(|w| series.get(w))
                .ok_or(ScoreError::OutOfRange {
                    week: w,
                    first: series.start_week,
                    last: series.end_week(),
                })
        })
        .collect()
}

/// The naive forecast of week `origin_week + horizon`: the value observed
/// `horizon` weeks earlier.
pub fn naive_forecast(series: &WeeklySeries, origin_week: u32, horizon: u32) -> Result<f64, ScoreError> {
    Ok(*naive_block(series, origin_week, horizon)?.last().expect("horizon >= 1"))
}

pub fn mase(model: &[f64], observations: &[f64], naive: &[f64]) -> Result<f64, ScoreError> {
    if naive.len() != observations.len() {
        return Err(ScoreError::LengthMismatch(naive.len(), observations.len()));
    }
    let denom = mae(naive, observations)?;
    if denom == 0.0 {
        return Err(ScoreError::ZeroNaiveMae);
    }
    Ok(mae(model, observations)? / denom)
}

pub fn interval_score(lower: f64, upper: f64, alpha: f64, y: f64) -> Result<f64, ScoreError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ScoreError::InvalidAlpha(alpha));
    }
    if lower > upper {
        return Err(ScoreError::InvalidInterval(lower, upper));
    }
    let mut s = upper - lower;
    if y < lower {
        s += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        s += 2.0 / alpha * (y - upper);
    }
    Ok(s)
}

pub fn wis(forecast: &QuantileForecast, y: f64) -> Result<f64, ScoreError> {
    let level = |p: f64| forecast.at(p).ok_or(ScoreError::MissingQuantileLevel(p));
    let median = level(0.5)?;
    let mut total = 0.5 * (y - median).abs();
    for alpha in WIS_ALPHAS {
        let l = level(alpha / 2.0)?;
        let u = level(1.0 - alpha / 2.0)?;
        total += alpha / 2.0 * interval_score(l, u, alpha, y)?;
    }
    Ok(total / (WIS_ALPHAS.len() as f64 + 0.5))
}

pub fn scaled_wis(model_wis: f64, naive_wis: f64) -> Result<f64, ScoreError> {
    if naive_wis == 0.0 {
        return Err(ScoreError::ZeroNaiveWis);
    }
    Ok(model_wis / naive_wis)
}

/// Naive point forecasts for the given origins and horizons, skipping any
/// whose source week is unobserved.
pub fn naive_points(truth: &Dataset, origins: impl IntoIterator<Item = u32>, horizons: &[u32]) -> Vec<PointForecast> {
    let mut out = Vec::new();
    for origin in origins {
        for target in Target::ALL {
            let series = truth.raw_series(target.channel());
            for &h in horizons {
                if let Ok(value) = naive_forecast(&series, origin, h) {
                    out.push(PointForecast {
                        target,
                        horizon: h,
                        origin_week: origin,
                        value,
                    });
                }
            }
        }
    }
    out
}

/// Quantile forecasts of the naive baseline, built like any other method's.
pub fn naive_quantiles(
    truth: &Dataset,
    origins: impl IntoIterator<Item = u32>,
    horizons: &[u32],
) -> Result<Vec<QuantileForecast>, ScoreError> {
    let points = naive_points(truth, origins, horizons);
    Ok(causal_quantiles(&points, truth)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub target: Target,
    pub horizon: u32,
    pub mase: f64,
    pub wis: f64,
    pub scaled_wis: f64,
    pub n_evaluated: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ReportRow>,
}

type CellKey = (Target, u32, u32);

/// Model forecast, naive forecast and the observed value.
type Scored<'a> = (&'a QuantileForecast, &'a QuantileForecast, f64);

fn index(forecasts: &[QuantileForecast]) -> BTreeMap<CellKey, &QuantileForecast> {
    forecasts.iter().map(|q| ((q.target, q.horizon, q.target_week()), q)).collect()
}

/// Score each method against the naive baseline over the target weeks where
/// truth, the method's forecast and the naive forecast all exist.
/// The baseline is rebuilt from `truth` for every origin any method
/// forecast from.
pub fn build_report(methods: &[(String, Vec<QuantileForecast>)], truth: &Dataset) -> Result<ScoreReport, ScoreError> {
    let origins: BTreeSet<u32> = methods.iter().flat_map(|(_, f)| f.iter().map(|q| q.origin_week)).collect();
    let horizons: BTreeSet<u32> = methods.iter().flat_map(|(_, f)| f.iter().map(|q| q.horizon)).collect();
    let horizons: Vec<u32> = horizons.into_iter().collect();
    let naive = naive_quantiles(truth, origins, &horizons)?;
    let naive_idx = index(&naive);
    let mut rows = Vec::new();
    for (method, forecasts) in methods {
        let mut cells: BTreeMap<(Target, u32), Vec<Scored>> = BTreeMap::new();
        let mut seen: BTreeSet<(Target, u32)> = BTreeSet::new();
        for (&(target, h, week), q) in &index(forecasts) {
            seen.insert((target, h));
            let (Some(y), Some(n)) = (truth.raw_value(target.channel(), week), naive_idx.get(&(target, h, week)))
            else {
                continue;
            };
            cells.entry((target, h)).or_default().push((q, n, y));
        }
        for (target, horizon) in seen {
            let Some(cell) = cells.get(&(target, horizon)) else {
                return Err(ScoreError::EmptyCell {
                    method: method.clone(),
                    target,
                    horizon,
                });
            };
            let model: Vec<f64> = cell.iter().map(|c| c.0.mu).collect();
            let base: Vec<f64> = cell.iter().map(|c| c.1.mu).collect();
            let obs: Vec<f64> = cell.iter().map(|c| c.2).collect();
            let mean_wis = |naive: bool| {
                cell.iter()
                    .map(|c| wis(if naive { c.1 } else { c.0 }, c.2))
                    .sum::<Result<f64, _>>()
                    .map(|s| s / cell.len() as f64)
            };
            let model_wis = mean_wis(false)?;
            let naive_wis = mean_wis(true)?;
            rows.push(ReportRow {
                method: method.clone(),
                target,
                horizon,
                mase: mase(&model, &obs, &base)?,
                wis: model_wis,
                scaled_wis: scaled_wis(model_wis, naive_wis)?,
                n_evaluated: cell.len(),
            });
        }
    }
    Ok(ScoreReport { rows })
}

impl ScoreReport {
    pub fn get(&self, method: &str, target: Target, horizon: u32) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target == target && r.horizon == horizon)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ScoreError> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self, ScoreError> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<Result<Vec<ReportRow>, _>>()?;
        Ok(Self { rows })
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:<7} {:>7} {:>8} {:>14} {:>10} {:>6}",
            "method", "target", "horizon", "MASE", "WIS", "scaled WIS", "n"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<12} {:<7} {:>7} {:>8.3} {:>14.2} {:>10.3} {:>6}",
                r.method,
                r.target.name(),
                r.horizon,
                r.mase,
                r.wis,
                r.scaled_wis,
                r.n_evaluated
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ScalingSpec;
    use crate::quantile::{build_quantile_forecast, HUB_LEVELS};
    use proptest::prelude::*;

    fn point_mass(m: f64) -> QuantileForecast {
        QuantileForecast {
            target: Target::Cases,
            horizon: 1,
            origin_week: 1,
            mu: m,
            sigma: 0.0,
            levels: HUB_LEVELS.to_vec(),
            values: vec![m; 23],
        }
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[3.0], &[1.0]).unwrap(), 2.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]).unwrap(), 1.0);
        assert!(matches!(mae(&[1.0], &[]), Err(ScoreError::LengthMismatch(1, 0))));
        assert!(matches!(mae(&[], &[]), Err(ScoreError::Empty)));
    }

    #[test]
    fn naive_examples() {
        let s = WeeklySeries::new(1, vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(naive_forecast(&s, 3, 1).unwrap(), 30.0);
        assert_eq!(naive_block(&s, 4, 2).unwrap(), vec![30.0, 40.0]);
        assert_eq!(naive_forecast(&s, 4, 2).unwrap(), 40.0);
        let c = WeeklySeries::new(1, vec![5.0; 8]);
        for h in 1..=4 {
            assert_eq!(naive_forecast(&c, 6, h).unwrap(), 5.0);
        }
        assert!(matches!(naive_block(&s, 2, 3), Err(ScoreError::OutOfRange { week: 0, .. })));
    }

    #[test]
    fn mase_examples() {
        let y = [1.0, 2.0, 3.0];
        let naive = [2.0, 1.0, 4.0];
        assert_eq!(mase(&naive, &y, &naive).unwrap(), 1.0);
        assert_eq!(mase(&y, &y, &naive).unwrap(), 0.0);
        assert_eq!(mase(&[1.75], &[1.0], &[2.0]).unwrap(), 0.75);
        assert!(matches!(mase(&y, &y, &y), Err(ScoreError::ZeroNaiveMae)));
    }

    #[test]
    fn interval_score_examples() {
        assert_eq!(interval_score(1.0, 3.0, 0.2, 2.0).unwrap(), 2.0);
        assert!((interval_score(1.0, 3.0, 0.2, 4.0).unwrap() - 12.0).abs() < 1e-12);
        assert_eq!(interval_score(1.0, 3.0, 0.5, 0.0).unwrap(), 6.0);
        assert!(matches!(interval_score(3.0, 1.0, 0.5, 0.0), Err(ScoreError::InvalidInterval(..))));
        assert!(matches!(interval_score(1.0, 3.0, 1.0, 0.0), Err(ScoreError::InvalidAlpha(_))));
    }

    #[test]
    fn wis_examples() {
        assert_eq!(wis(&point_mass(4.0), 4.0).unwrap(), 0.0);
        assert!((wis(&point_mass(4.0), 9.0).unwrap() - 5.0).abs() < 1e-12);
        let mut q = point_mass(1.0);
        q.levels.pop();
        q.values.pop();
        assert!(matches!(wis(&q, 1.0), Err(ScoreError::MissingQuantileLevel(_))));
    }

    #[test]
    fn scaled_wis_examples() {
        assert_eq!(scaled_wis(3.0, 3.0).unwrap(), 1.0);
        assert!((scaled_wis(103.0, 99.04).unwrap() - 1.04).abs() < 1e-3);
        assert_eq!(scaled_wis(1.0, 2.0).unwrap(), 0.5);
        assert!(matches!(scaled_wis(1.0, 0.0), Err(ScoreError::ZeroNaiveWis)));
    }

    fn truth(n: u32) -> Dataset {
        let series = |f: fn(f64) -> f64| WeeklySeries::new(1, (1..=n).map(|w| f(w as f64)).collect());
        Dataset::new(
            [
                series(|w| 100.0 + 10.0 * (w * 0.7).sin() + w),
                series(|w| 5.0 + (w * 1.3).cos()),
                series(|w| 20.0 + w * 0.5 + (w * 2.1).sin()),
                series(|_| 0.0),
                series(|_| 0.0),
            ],
            ScalingSpec::identity(),
            None,
        )
    }

    #[test]
    fn naive_against_itself_scores_one() {
        let t = truth(30);
        let naive = naive_quantiles(&t, 5..=20, &[1, 2, 3, 4]).unwrap();
        let report = build_report(&[(NAIVE_METHOD.to_string(), naive)], &t).unwrap();
        assert_eq!(report.rows.len(), 12);
        for r in &report.rows {
            assert_eq!(r.mase, 1.0);
            assert_eq!(r.scaled_wis, 1.0);
            assert_eq!(r.n_evaluated, 16);
        }
    }

    #[test]
    fn truncated_truth_shrinks_cells() {
        let t = truth(30);
        let naive = naive_quantiles(&t, 5..=20, &[1, 2]).unwrap();
        let mut short = t.clone();
        for ch in &mut short.channels {
            ch.values.truncate(18);
        }
        let report = build_report(&[("m".to_string(), naive)], &short).unwrap();
        assert_eq!(report.get("m", Target::Cases, 1).unwrap().n_evaluated, 13);
        assert_eq!(report.get("m", Target::Cases, 2).unwrap().n_evaluated, 12);
    }

    #[test]
    fn report_csv_round_trip() {
        let t = truth(20);
        let naive = naive_quantiles(&t, 4..=12, &[1, 2, 3, 4]).unwrap();
        let report = build_report(&[(NAIVE_METHOD.to_string(), naive)], &t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        report.write_csv(&p).unwrap();
        let head = std::fs::read_to_string(&p).unwrap();
        assert!(head.starts_with("method,target,horizon,mase,wis,scaled_wis,n_evaluated\n"));
        assert_eq!(ScoreReport::read_csv(&p).unwrap(), report);
        assert_eq!(report.to_table().lines().count(), 13);
    }

    proptest! {
        #[test]
        fn point_mass_wis_is_absolute_error(m in -1e4f64..1e4, y in -1e4f64..1e4) {
            let w = wis(&point_mass(m), y).unwrap();
            prop_assert!((w - (y - m).abs()).abs() <= 1e-12 * (y - m).abs().max(1.0));
        }

        #[test]
        fn interval_score_translation_invariant(l in -100.0f64..100.0, width in 0.0f64..50.0, y in -200.0f64..200.0, a in 0.01f64..0.99, c in -1e3f64..1e3) {
            let s0 = interval_score(l, l + width, a, y).unwrap();
            let s1 = interval_score(l + c, l + width + c, a, y + c).unwrap();
            prop_assert!((s0 - s1).abs() <= 1e-9 * s0.max(1.0));
        }

        #[test]
        fn wis_homogeneous_and_nonnegative(mu in 0.0f64..1e3, sigma in 0.0f64..100.0, y in 0.0f64..2e3, c in 0.01f64..100.0) {
            let p = PointForecast { target: Target::Cases, horizon: 1, origin_week: 1, value: mu };
            let q = build_quantile_forecast(&p, sigma).unwrap();
            let mut qc = q.clone();
            qc.values.iter_mut().for_each(|v| *v *= c);
            let w = wis(&q, y).unwrap();
            prop_assert!(w >= 0.0);
            prop_assert!((wis(&qc, c * y).unwrap() - c * w).abs() <= 1e-9 * (c * w).max(1.0));
        }
    }
}
