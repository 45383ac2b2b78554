//! Long-format tables for external plotting.
//!
//! `plot_series.csv` pairs truth with each point forecast, one row per
//! (method, target, horizon, target week). `plot_quantiles.csv` carries the
//! 23 quantiles of every forecast as columns. `plot_series.json` groups the
//! series by report cell.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::data::Dataset;
use crate::forecast::Target;
use crate::quantile::{QuantileForecast, HUB_LEVELS};
use crate::scoring::ScoreReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub origin_week: u32,
    pub target_week: u32,
    pub truth: Option<f64>,
    pub forecast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub method: String,
    pub target: Target,
    pub horizon: u32,
    pub mase: f64,
    pub scaled_wis: f64,
    pub points: Vec<SeriesPoint>,
}

/// One series per report row, built from that method's forecasts.
pub fn plot_series(
    report: &ScoreReport,
    methods: &[(String, Vec<QuantileForecast>)],
    truth: &Dataset,
) -> Vec<PlotSeries> {
    report
        .rows
        .iter()
        .map(|row| {
            let mut points: Vec<SeriesPoint> = methods
                .iter()
                .filter(|(m, _)| *m == row.method)
                .flat_map(|(_, fs)| fs.iter())
                .filter(|q| q.target == row.target && q.horizon == row.horizon)
                .map(|q| SeriesPoint {
                    origin_week: q.origin_week,
                    target_week: q.target_week(),
                    truth: truth.raw_value(q.target.channel(), q.target_week()),
                    forecast: q.mu,
                })
                .collect();
            points.sort_by_key(|p| p.target_week);
            PlotSeries {
                method: row.method.clone(),
                target: row.target,
                horizon: row.horizon,
                mase: row.mase,
                scaled_wis: row.scaled_wis,
                points,
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write the three plot files into `dir` and return their paths.
pub fn export_plots(
    dir: &Path,
    report: &ScoreReport,
    methods: &[(String, Vec<QuantileForecast>)],
    truth: &Dataset,
) -> std::io::Result<Vec<PathBuf>> {
    let series = plot_series(report, methods, truth);
    let err = |e: csv::Error| std::io::Error::other(e);

    let series_path = dir.join("plot_series.csv");
    let mut w = csv::Writer::from_path(&series_path).map_err(err)?;
    w.write_record(["method", "target", "horizon", "origin_week", "target_week", "truth", "forecast"])
        .map_err(err)?;
    for s in &series {
        for p in &s.points {
            w.write_record([
                s.method.clone(),
                s.target.name().to_string(),
                s.horizon.to_string(),
                p.origin_week.to_string(),
                p.target_week.to_string(),
                fmt_opt(p.truth),
                p.forecast.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush()?;

    let quant_path = dir.join("plot_quantiles.csv");
    let mut w = csv::Writer::from_path(&quant_path).map_err(err)?;
    let mut header: Vec<String> = ["method", "target", "horizon", "origin_week", "target_week"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(HUB_LEVELS.iter().map(|l| format!("q{l:.3}")));
    w.write_record(&header).map_err(err)?;
    let cells: Vec<(&str, Target, u32)> = report
        .rows
        .iter()
        .map(|r| (r.method.as_str(), r.target, r.horizon))
        .collect();
    for (m, fs) in methods {
        let mut fs: Vec<&QuantileForecast> = fs
            .iter()
            .filter(|q| cells.contains(&(m.as_str(), q.target, q.horizon)))
            .collect();
        fs.sort_by_key(|q| (q.target, q.horizon, q.origin_week));
        for q in fs {
            let mut rec = vec![
                m.clone(),
                q.target.name().to_string(),
                q.horizon.to_string(),
                q.origin_week.to_string(),
                q.target_week().to_string(),
            ];
            rec.extend(HUB_LEVELS.iter().map(|&l| fmt_opt(q.at(l))));
            w.write_record(&rec).map_err(err)?;
        }
    }
    w.flush()?;

    let json_path = dir.join("plot_series.json");
    let mut text = serde_json::to_string_pretty(&series).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(&json_path, text)?;
    Ok(vec![series_path, quant_path, json_path])
}
