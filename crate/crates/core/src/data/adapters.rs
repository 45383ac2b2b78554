//! Converters from upstream export formats to canonical `date,value` series.
//!
//! Supported sources:
//! - JHU CSSE wide time series (`time_series_covid19_{confirmed,deaths}_US.csv`):
//!   county rows summed per state, cumulative counts differenced to daily.
//! - HHS state timeseries: adult plus pediatric
//!   `previous_day_admission_*_covid_confirmed`.
//! - Google community mobility reports: state-level
//!   `residential_percent_change_from_baseline`.
//! - GovEx vaccine timeline: `Doses_admin` for `Vaccine_Type == All`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::{Channel, DataError, RawSeries};

struct Table {
    path: String,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, DataError> {
        if !path.exists() {
            return Err(DataError::MissingFile(path.display().to_string()));
        }
        let p = path.display().to_string();
        let f = fs::File::open(path).map_err(|source| DataError::Io { path: p.clone(), source })?;
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(f);
        let bad = |e: csv::Error| DataError::MalformedRow {
            path: p.clone(),
            line: e.position().map(|x| x.line()).unwrap_or(0),
            msg: e.to_string(),
        };
        let headers = rdr.headers().map_err(bad)?.iter().map(|h| h.trim_start_matches('\u{feff}').to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(bad)?;
            rows.push((rec.position().map(|x| x.line()).unwrap_or(0), rec));
        }
        Ok(Self { path: p, headers, rows })
    }

    fn col(&self, name: &str) -> Result<usize, DataError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            DataError::Schema(format!("{}: missing column `{name}`", self.path))
        })
    }

    fn malformed(&self, line: u64, msg: String) -> DataError {
        DataError::MalformedRow {
            path: self.path.clone(),
            line,
            msg,
        }
    }
}

fn parse_num(t: &Table, line: u64, s: &str) -> Result<f64, DataError> {
    s.trim().parse::<f64>().map_err(|e| t.malformed(line, format!("bad number {s:?}: {e}")))
}

fn finish(channel: Channel, map: BTreeMap<NaiveDate, Option<f64>>) -> Result<RawSeries, DataError> {
    if map.is_empty() {
        return Err(DataError::EmptySeries(channel));
    }
    let (dates, values) = map.into_iter().unzip();
    Ok(RawSeries::new(channel, dates, values))
}

/// JHU CSSE wide format. Date columns look like `3/15/20`. The first date
/// has no predecessor and is dropped; negative daily differences (data
/// corrections) are clamped to zero.
pub fn jhu_csse_wide(path: &Path, state: &str, channel: Channel) -> Result<RawSeries, DataError> {
    let t = Table::read(path)?;
    let state_col = t.col("Province_State")?;
    let date_cols: Vec<(usize, NaiveDate)> = t
        .headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| NaiveDate::parse_from_str(h, "%m/%d/%y").ok().map(|d| (i, d)))
        .collect();
    if date_cols.is_empty() {
        return Err(DataError::Schema(format!("{}: no date columns", t.path)));
    }
    let mut cumulative = vec![0.0; date_cols.len()];
    let mut matched = false;
    for (line, rec) in &t.rows {
        if rec.get(state_col) != Some(state) {
            continue;
        }
        matched = true;
        for (k, (i, _)) in date_cols.iter().enumerate() {
            let s = rec.get(*i).ok_or_else(|| t.malformed(*line, "short row".into()))?;
            cumulative[k] += parse_num(&t, *line, s)?;
        }
    }
    if !matched {
        return Err(DataError::EmptySeries(channel));
    }
    let map = date_cols
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, (_, d))| (*d, Some((cumulative[k] - cumulative[k - 1]).max(0.0))))
        .collect();
    finish(channel, map)
}

fn parse_flexible_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let s = s.get(..10).unwrap_or(s);
    NaiveDate::parse_from_str(s, "%Y/%m/%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

/// HHS state timeseries. Rows with an empty adult count are skipped; an
/// empty pediatric count is read as zero.
pub fn hhs_admissions(path: &Path, state: &str) -> Result<RawSeries, DataError> {
    let t = Table::read(path)?;
    let (sc, dc) = (t.col("state")?, t.col("date")?);
    let adult = t.col("previous_day_admission_adult_covid_confirmed")?;
    let ped = t.col("previous_day_admission_pediatric_covid_confirmed")?;
    let mut map = BTreeMap::new();
    for (line, rec) in &t.rows {
        if rec.get(sc) != Some(state) {
            continue;
        }
        let date = parse_flexible_date(rec.get(dc).unwrap_or(""))
            .ok_or_else(|| t.malformed(*line, format!("bad date {:?}", rec.get(dc))))?;
        let a = rec.get(adult).unwrap_or("").trim();
        if a.is_empty() {
            continue;
        }
        let p = rec.get(ped).unwrap_or("").trim();
        let mut v = parse_num(&t, *line, a)?;
        if !p.is_empty() {
            v += parse_num(&t, *line, p)?;
        }
        if map.insert(date, Some(v)).is_some() {
            return Err(DataError::DuplicateDate { path: t.path.clone(), date });
        }
    }
    finish(Channel::Hosp, map)
}

/// Google mobility report, state level (`sub_region_2` and `metro_area`
/// empty). Days without a residential value are skipped.
pub fn google_mobility(path: &Path, region: &str) -> Result<RawSeries, DataError> {
    let t = Table::read(path)?;
    let cc = t.col("country_region_code")?;
    let r1 = t.col("sub_region_1")?;
    let r2 = t.col("sub_region_2")?;
    let metro = t.col("metro_area").ok();
    let dc = t.col("date")?;
    let vc = t.col("residential_percent_change_from_baseline")?;
    let mut map = BTreeMap::new();
    for (line, rec) in &t.rows {
        let empty = |i: usize| rec.get(i).map(str::is_empty).unwrap_or(true);
        if rec.get(cc) != Some("US") || rec.get(r1) != Some(region) || !empty(r2) || !metro.map(empty).unwrap_or(true) {
            continue;
        }
        let v = rec.get(vc).unwrap_or("").trim();
        if v.is_empty() {
            continue;
        }
        let date = parse_flexible_date(rec.get(dc).unwrap_or(""))
            .ok_or_else(|| t.malformed(*line, format!("bad date {:?}", rec.get(dc))))?;
        map.insert(date, Some(parse_num(&t, *line, v)?));
    }
    finish(Channel::Mobility, map)
}

/// GovEx vaccine timeline. Empty `Doses_admin` values stay missing.
pub fn govex_vaccines(path: &Path, state: &str) -> Result<RawSeries, DataError> {
    let t = Table::read(path)?;
    let sc = t.col("Province_State")?;
    let dc = t.col("Date")?;
    let tc = t.col("Vaccine_Type")?;
    let vc = t.col("Doses_admin")?;
    let mut map = BTreeMap::new();
    for (line, rec) in &t.rows {
        if rec.get(sc) != Some(state) || rec.get(tc) != Some("All") {
            continue;
        }
        let date = parse_flexible_date(rec.get(dc).unwrap_or(""))
            .ok_or_else(|| t.malformed(*line, format!("bad date {:?}", rec.get(dc))))?;
        let v = rec.get(vc).unwrap_or("").trim();
        let v = if v.is_empty() { None } else { Some(parse_num(&t, *line, v)?) };
        map.insert(date, v);
    }
    finish(Channel::Vaccines, map)
}
