//! Surveillance series ingestion and weekly preprocessing.
//!
//! Daily channels are smoothed with a trailing 7-day mean, cut into
//! non-overlapping weeks, hospitalizations lose their first 20 weeks,
//! everything after week 110 is dropped, and each channel is min–max scaled.

pub mod adapters;
mod io;
mod pipeline;

pub use io::{load_csv, read_dataset, sidecar_paths, write_dataset, write_raw_csv};
pub use pipeline::{preprocess, preprocess_dir, PreprocessOptions, PreprocessSummary, RawInputs};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weeks of hospitalization data discarded at the start of the series.
pub const HOSP_TRIM_WEEKS: usize = 20;
/// Last week kept by default.
pub const DEFAULT_CUTOFF_WEEK: u32 = 110;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing input file {0}")]
    MissingFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: malformed row at line {line}: {msg}")]
    MalformedRow { path: String, line: u64, msg: String },
    #[error("{path}: duplicate date {date}")]
    DuplicateDate { path: String, date: NaiveDate },
    #[error("{0} series is empty")]
    EmptySeries(Channel),
    #[error("vaccine series has no reported values")]
    AllMissing,
    #[error("{channel} is missing a value for {date}")]
    MissingValue { channel: Channel, date: NaiveDate },
    #[error("operation requires the {expected} channel, got {found}")]
    WrongChannel { expected: Channel, found: Channel },
    #[error("series too short: need {need}, have {have}")]
    TooShort { need: usize, have: usize },
    #[error("channels share no common dates")]
    NoOverlap,
    #[error("{0}")]
    Schema(String),
}

/// The five observation channels, in dataset column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Cases,
    Deaths,
    Hosp,
    Mobility,
    Vaccines,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Cases,
        Channel::Deaths,
        Channel::Hosp,
        Channel::Mobility,
        Channel::Vaccines,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Cases => "cases",
            Channel::Deaths => "deaths",
            Channel::Hosp => "hosp",
            Channel::Mobility => "mobility",
            Channel::Vaccines => "vaccines",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cases" | "case" => Some(Channel::Cases),
            "deaths" | "death" => Some(Channel::Deaths),
            "hosp" | "hospitalizations" | "hospitalization" => Some(Channel::Hosp),
            "mobility" => Some(Channel::Mobility),
            "vaccines" | "vaccine_doses" | "vaccine" => Some(Channel::Vaccines),
            _ => None,
        }
    }

    /// Counts are summed per week; covariate levels are averaged.
    pub fn aggregation(self) -> Aggregation {
        match self {
            Channel::Cases | Channel::Deaths | Channel::Hosp => Aggregation::Sum,
            Channel::Mobility | Channel::Vaccines => Aggregation::Mean,
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Mean,
}

/// A daily series as read from disk. `None` marks a missing value, which only
/// the vaccine channel may carry.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub channel: Channel,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<Option<f64>>,
}

impl RawSeries {
    pub fn new(channel: Channel, dates: Vec<NaiveDate>, values: Vec<Option<f64>>) -> Self {
        assert_eq!(dates.len(), values.len());
        Self {
            channel,
            dates,
            values,
        }
    }

    /// A series with every value present.
    pub fn complete(channel: Channel, start: NaiveDate, values: &[f64]) -> Self {
        let dates = (0..values.len())
            .map(|i| start + chrono::Days::new(i as u64))
            .collect();
        Self::new(channel, dates, values.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// All values, or the first missing date as an error.
    pub fn complete_values(&self) -> Result<Vec<f64>, DataError> {
        self.values
            .iter()
            .zip(&self.dates)
            .map(|(v, d)| {
                v.ok_or(DataError::MissingValue {
                    channel: self.channel,
                    date: *d,
                })
            })
            .collect()
    }

    /// Reindex onto every day of `[start, end]`, marking absent days missing.
    pub fn reindex_daily(&self, start: NaiveDate, end: NaiveDate) -> RawSeries {
        let n = (end - start).num_days() + 1;
        let mut values = vec![None; n.max(0) as usize];
        for (d, v) in self.dates.iter().zip(&self.values) {
            let off = (*d - start).num_days();
            if off >= 0 && off < n {
                values[off as usize] = *v;
            }
        }
        RawSeries::complete(self.channel, start, &vec![0.0; values.len()]).with_values(values)
    }

    fn with_values(mut self, values: Vec<Option<f64>>) -> Self {
        self.values = values;
        self
    }
}

/// Fill a cumulative-dose series: zero before the first report, linear
/// interpolation (by calendar distance) between reports, last value carried
/// forward after the final report.
pub fn impute_vaccine(series: &RawSeries) -> Result<RawSeries, DataError> {
    if series.channel != Channel::Vaccines {
        return Err(DataError::WrongChannel {
            expected: Channel::Vaccines,
            found: series.channel,
        });
    }
    let reported: Vec<usize> = (0..series.len()).filter(|&i| series.values[i].is_some()).collect();
    let (Some(&first), Some(&last)) = (reported.first(), reported.last()) else {
        return Err(DataError::AllMissing);
    };
    let mut out = series.values.clone();
    for v in &mut out[..first] {
        *v = Some(0.0);
    }
    for pair in reported.windows(2) {
        let (i0, i1) = (pair[0], pair[1]);
        if i1 == i0 + 1 {
            continue;
        }
        let (y0, y1) = (series.values[i0].unwrap(), series.values[i1].unwrap());
        let d0 = series.dates[i0];
        let span = (series.dates[i1] - d0).num_days() as f64;
        for (i, v) in out.iter_mut().enumerate().take(i1).skip(i0 + 1) {
            let x = (series.dates[i] - d0).num_days() as f64;
            *v = Some(y0 + (y1 - y0) * x / span);
        }
    }
    let tail = series.values[last];
    for v in &mut out[last + 1..] {
        *v = tail;
    }
    Ok(RawSeries::new(series.channel, series.dates.clone(), out))
}

/// Trailing 7-day mean; the first six days are dropped.
pub fn moving_average_7d(series: &RawSeries) -> Result<RawSeries, DataError> {
    let values = series.complete_values()?;
    if values.len() < 7 {
        return Err(DataError::TooShort {
            need: 7,
            have: values.len(),
        });
    }
    let out: Vec<Option<f64>> = values
        .windows(7)
        .map(|w| Some(w.iter().fold(0.0, |acc, v| acc + v) / 7.0))
        .collect();
    Ok(RawSeries::new(series.channel, series.dates[6..].to_vec(), out))
}

/// A contiguous run of weekly values starting at `start_week` (1-based).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    pub start_week: u32,
    pub values: Vec<f64>,
}

impl WeeklySeries {
    pub fn new(start_week: u32, values: Vec<f64>) -> Self {
        Self { start_week, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last covered week (`start_week - 1` when empty).
    pub fn end_week(&self) -> u32 {
        self.start_week + self.values.len() as u32 - 1
    }

    pub fn get(&self, week: u32) -> Option<f64> {
        if week < self.start_week {
            return None;
        }
        self.values.get((week - self.start_week) as usize).copied()
    }

    pub fn weeks(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| (self.start_week + i as u32, *v))
    }
}

/// Non-overlapping 7-day blocks anchored at the first date; a trailing
/// partial week is dropped.
pub fn aggregate_weekly(series: &RawSeries, mode: Aggregation) -> Result<WeeklySeries, DataError> {
    let values = series.complete_values()?;
    if values.len() < 7 {
        return Err(DataError::TooShort {
            need: 7,
            have: values.len(),
        });
    }
    let weekly = values
        .chunks_exact(7)
        .map(|w| {
            let s = w.iter().fold(0.0, |acc, v| acc + v);
            match mode {
                Aggregation::Sum => s,
                Aggregation::Mean => s / 7.0,
            }
        })
        .collect();
    Ok(WeeklySeries::new(1, weekly))
}

/// Drop the first 20 weeks, keeping the original week numbers.
pub fn trim_hospitalizations(series: &WeeklySeries) -> Result<WeeklySeries, DataError> {
    if series.len() <= HOSP_TRIM_WEEKS {
        return Err(DataError::TooShort {
            need: HOSP_TRIM_WEEKS + 1,
            have: series.len(),
        });
    }
    Ok(WeeklySeries::new(
        series.start_week + HOSP_TRIM_WEEKS as u32,
        series.values[HOSP_TRIM_WEEKS..].to_vec(),
    ))
}

/// Per-channel affine map `normalized = (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub offset: [f64; 5],
    pub scale: [f64; 5],
}

impl ScalingSpec {
    pub fn identity() -> Self {
        Self {
            offset: [0.0; 5],
            scale: [1.0; 5],
        }
    }

    pub fn normalize(&self, ch: Channel, x: f64) -> f64 {
        (x - self.offset[ch.index()]) / self.scale[ch.index()]
    }

    pub fn denormalize(&self, ch: Channel, v: f64) -> f64 {
        v * self.scale[ch.index()] + self.offset[ch.index()]
    }

    /// Largest raw value of a min–max scaled channel.
    pub fn max_value(&self, ch: Channel) -> f64 {
        self.offset[ch.index()] + self.scale[ch.index()]
    }
}

/// Five weekly channels on a shared week axis.
///
/// Values are stored in the units described by `scaling` (identity for raw
/// data, min–max scaled after [`normalize`]). Hospitalizations may start
/// later than the other channels; all channels end at the same week unless
/// truncated data ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: [WeeklySeries; 5],
    pub scaling: ScalingSpec,
    /// First day of week 1, when known.
    pub start_date: Option<NaiveDate>,
}

impl Dataset {
    pub fn new(channels: [WeeklySeries; 5], scaling: ScalingSpec, start_date: Option<NaiveDate>) -> Self {
        Self {
            channels,
            scaling,
            start_date,
        }
    }

    pub fn channel(&self, ch: Channel) -> &WeeklySeries {
        &self.channels[ch.index()]
    }

    /// Stored (possibly normalized) value.
    pub fn value(&self, ch: Channel, week: u32) -> Option<f64> {
        self.channel(ch).get(week)
    }

    /// Value in original units.
    pub fn raw_value(&self, ch: Channel, week: u32) -> Option<f64> {
        self.value(ch, week).map(|v| self.scaling.denormalize(ch, v))
    }

    /// Last week covered by any channel.
    pub fn weeks(&self) -> u32 {
        self.channels
            .iter()
            .filter(|c| !c.is_empty())
            .map(|c| c.end_week())
            .max()
            .unwrap_or(0)
    }

    /// The same channels with `channel` replaced by its raw-unit values.
    pub fn raw_series(&self, ch: Channel) -> WeeklySeries {
        let s = self.channel(ch);
        WeeklySeries::new(
            s.start_week,
            s.values.iter().map(|&v| self.scaling.denormalize(ch, v)).collect(),
        )
    }
}

/// Cut every channel at `cutoff` (no-op for shorter channels).
pub fn truncate_after_week(dataset: &Dataset, cutoff: u32) -> Dataset {
    let mut out = dataset.clone();
    for ch in &mut out.channels {
        let keep = cutoff.saturating_sub(ch.start_week - 1).min(ch.len() as u32) as usize;
        ch.values.truncate(keep);
    }
    out
}

/// Min–max scale each channel (offset = min, scale = max − min, or 1 for a
/// constant channel). Values are first mapped back to raw units.
pub fn normalize(dataset: &Dataset) -> (Dataset, ScalingSpec) {
    let mut spec = ScalingSpec::identity();
    let mut out = dataset.clone();
    for ch in Channel::ALL {
        let raw = dataset.raw_series(ch);
        let (lo, hi) = raw
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (offset, scale) = if raw.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi - lo)
        } else {
            (lo, 1.0)
        };
        spec.offset[ch.index()] = offset;
        spec.scale[ch.index()] = scale;
        out.channels[ch.index()].values = raw.values.iter().map(|&x| (x - offset) / scale).collect();
    }
    out.scaling = spec;
    (out, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn vax(vals: &[Option<f64>]) -> RawSeries {
        let dates = (0..vals.len()).map(|i| d("2021-01-01") + chrono::Days::new(i as u64)).collect();
        RawSeries::new(Channel::Vaccines, dates, vals.to_vec())
    }

    fn vals(s: &RawSeries) -> Vec<f64> {
        s.complete_values().unwrap()
    }

    #[test]
    fn impute_leading_zeros() {
        assert_eq!(vals(&impute_vaccine(&vax(&[None, None, Some(100.0)])).unwrap()), [0.0, 0.0, 100.0]);
    }

    #[test]
    fn impute_interior_midpoint() {
        assert_eq!(vals(&impute_vaccine(&vax(&[Some(100.0), None, Some(200.0)])).unwrap()), [100.0, 150.0, 200.0]);
    }

    #[test]
    fn impute_interior_line() {
        let out = impute_vaccine(&vax(&[Some(0.0), None, None, Some(300.0)])).unwrap();
        // Line through (0, 0) and (3, 300) at x = 1, 2.
        let line = |x: f64| 300.0 * x / 3.0;
        assert_eq!(vals(&out), [0.0, line(1.0), line(2.0), 300.0]);
    }

    #[test]
    fn impute_uses_calendar_distance() {
        let s = RawSeries::new(
            Channel::Vaccines,
            vec![d("2021-01-01"), d("2021-01-02"), d("2021-01-05")],
            vec![Some(0.0), None, Some(40.0)],
        );
        assert_eq!(vals(&impute_vaccine(&s).unwrap()), [0.0, 10.0, 40.0]);
    }

    #[test]
    fn impute_errors() {
        assert!(matches!(impute_vaccine(&vax(&[None, None])), Err(DataError::AllMissing)));
        let cases = RawSeries::complete(Channel::Cases, d("2021-01-01"), &[1.0]);
        assert!(matches!(impute_vaccine(&cases), Err(DataError::WrongChannel { .. })));
    }

    #[test]
    fn moving_average_examples() {
        let c = RawSeries::complete(Channel::Cases, d("2020-01-01"), &[3.5; 10]);
        let out = moving_average_7d(&c).unwrap();
        assert_eq!(vals(&out), vec![3.5; 4]);
        assert_eq!(out.dates[0], d("2020-01-07"));

        let spike = RawSeries::complete(Channel::Cases, d("2020-01-01"), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.0]);
        assert_eq!(vals(&moving_average_7d(&spike).unwrap()), [1.0]);

        let ramp: Vec<f64> = (1..=14).map(f64::from).collect();
        let out = vals(&moving_average_7d(&RawSeries::complete(Channel::Cases, d("2020-01-01"), &ramp)).unwrap());
        let brute: Vec<f64> = (6..14).map(|t| ramp[t - 6..=t].iter().sum::<f64>() / 7.0).collect();
        assert_eq!(out, brute);
        assert_eq!(out, (4..=11).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn moving_average_too_short() {
        let c = RawSeries::complete(Channel::Cases, d("2020-01-01"), &[1.0; 6]);
        assert!(matches!(moving_average_7d(&c), Err(DataError::TooShort { need: 7, have: 6 })));
    }

    #[test]
    fn aggregate_examples() {
        let s = RawSeries::complete(Channel::Cases, d("2020-01-01"), &[2.5; 7]);
        assert_eq!(aggregate_weekly(&s, Aggregation::Sum).unwrap().values, [17.5]);
        let s = RawSeries::complete(Channel::Mobility, d("2020-01-01"), &[4.0; 14]);
        assert_eq!(aggregate_weekly(&s, Aggregation::Mean).unwrap().values, [4.0, 4.0]);
        let ramp: Vec<f64> = (1..=10).map(f64::from).collect();
        let s = RawSeries::complete(Channel::Cases, d("2020-01-01"), &ramp);
        let w = aggregate_weekly(&s, Aggregation::Sum).unwrap();
        assert_eq!(w.values, [28.0]);
        assert_eq!(w.start_week, 1);
        assert!(aggregate_weekly(&RawSeries::complete(Channel::Cases, d("2020-01-01"), &[1.0; 3]), Aggregation::Sum).is_err());
    }

    #[test]
    fn trim_examples() {
        let s = WeeklySeries::new(1, (0..25).map(f64::from).collect());
        let t = trim_hospitalizations(&s).unwrap();
        assert_eq!(t.start_week, 21);
        assert_eq!(t.len(), 5);
        assert_eq!(t.values[0], 20.0);
        assert!(matches!(
            trim_hospitalizations(&WeeklySeries::new(1, vec![0.0; 20])),
            Err(DataError::TooShort { .. })
        ));
        assert_eq!(trim_hospitalizations(&WeeklySeries::new(1, vec![0.0; 110])).unwrap().len(), 90);
    }

    fn ds(lens: [usize; 5], starts: [u32; 5]) -> Dataset {
        let ch = |i: usize| WeeklySeries::new(starts[i], (0..lens[i]).map(|v| v as f64).collect());
        Dataset::new([ch(0), ch(1), ch(2), ch(3), ch(4)], ScalingSpec::identity(), None)
    }

    #[test]
    fn truncate_examples() {
        let t = truncate_after_week(&ds([120; 5], [1; 5]), 110);
        assert!(t.channels.iter().all(|c| c.len() == 110));
        let short = ds([90; 5], [1; 5]);
        assert_eq!(truncate_after_week(&short, 110), short);
        let t = truncate_after_week(&ds([120; 5], [1; 5]), 1);
        assert!(t.channels.iter().all(|c| c.len() == 1));
        // Hospitalizations starting at week 21 keep weeks 21..=110.
        let t = truncate_after_week(&ds([120, 120, 100, 120, 120], [1, 1, 21, 1, 1]), 110);
        assert_eq!(t.channel(Channel::Hosp).len(), 90);
        assert_eq!(t.channel(Channel::Hosp).end_week(), 110);
        assert_eq!(t.weeks(), 110);
    }

    #[test]
    fn normalize_examples() {
        let mut data = ds([3; 5], [1; 5]);
        data.channels[0].values = vec![0.0, 5.0, 10.0];
        data.channels[1].values = vec![4.0, 4.0, 4.0];
        data.channels[2].values = vec![2.0, 3.0, 7.0];
        let (n, spec) = normalize(&data);
        assert_eq!(n.channels[0].values, [0.0, 0.5, 1.0]);
        assert_eq!((spec.offset[0], spec.scale[0]), (0.0, 10.0));
        assert_eq!(n.channels[1].values, [0.0, 0.0, 0.0]);
        assert_eq!(spec.scale[1], 1.0);
        assert_eq!(n.channels[2].values, [0.0, 0.2, 1.0]);
    }

    proptest! {
        #[test]
        fn normalize_roundtrips(values in prop::collection::vec(-1e9f64..1e9, 1..40)) {
            let mut data = ds([1; 5], [1; 5]);
            data.channels[0].values = values.clone();
            let (n, spec) = normalize(&data);
            for (i, x) in values.iter().enumerate() {
                let back = spec.denormalize(Channel::Cases, n.channels[0].values[i]);
                prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(spec.scale[0]));
            }
            prop_assert!(n.channels[0].values.iter().all(|v| (-0.1..=1.5).contains(v)));
        }

        #[test]
        fn smoothing_and_summing_preserve_sign(values in prop::collection::vec(0.0f64..1e6, 7..60)) {
            let s = RawSeries::complete(Channel::Cases, d("2020-03-01"), &values);
            let ma = moving_average_7d(&s).unwrap();
            if ma.len() >= 7 {
                let w = aggregate_weekly(&ma, Aggregation::Sum).unwrap();
                prop_assert!(w.values.iter().all(|v| *v >= 0.0));
            }
        }

        #[test]
        fn imputation_keeps_reported_values(mask in prop::collection::vec(any::<bool>(), 2..40)) {
            let vals: Vec<Option<f64>> = mask.iter().enumerate()
                .map(|(i, keep)| keep.then_some(10.0 * i as f64)).collect();
            prop_assume!(vals.iter().any(|v| v.is_some()));
            let out = impute_vaccine(&vax(&vals)).unwrap();
            prop_assert!(out.values.iter().all(|v| v.is_some()));
            for (a, b) in vals.iter().zip(&out.values) {
                if let Some(a) = a { prop_assert_eq!(Some(*a), *b); }
            }
            let v = out.complete_values().unwrap();
            prop_assert!(v.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn trim_and_truncate_keep_values_bit_exact(vals in prop::collection::vec(any::<f64>(), 21..80), cutoff in 1u32..100) {
            let s = WeeklySeries::new(1, vals.clone());
            let t = trim_hospitalizations(&s).unwrap();
            prop_assert!(t.values.iter().zip(&vals[20..]).all(|(a, b)| a.to_bits() == b.to_bits()));
            let data = Dataset::new([s.clone(), s.clone(), t, s.clone(), s], ScalingSpec::identity(), None);
            let cut = truncate_after_week(&data, cutoff);
            for ch in Channel::ALL {
                for (w, v) in cut.channel(ch).weeks() {
                    prop_assert!(w <= cutoff);
                    prop_assert_eq!(v.to_bits(), data.value(ch, w).unwrap().to_bits());
                }
            }
        }
    }
}
