use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;

use super::{Channel, DataError, Dataset, RawSeries, ScalingSpec, WeeklySeries};

const DATE_FMT: &str = "%Y-%m-%d";
const DATASET_HEADER: [&str; 6] = ["week", "cases", "deaths", "hosp", "mobility", "vaccines"];

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    DataError::MalformedRow {
        path: path.display().to_string(),
        line,
        msg: e.to_string(),
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let f = fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(f))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<(), DataError> {
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(expected.iter().copied()) {
        return Err(DataError::BadHeader {
            path: path.display().to_string(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

/// Read a canonical `date,value` file. Rows are sorted by date; empty values
/// are only accepted for the vaccine channel.
pub fn load_csv(path: &Path, channel: Channel) -> Result<RawSeries, DataError> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &["date", "value"])?;
    let p = path.display().to_string();
    let mut rows: Vec<(NaiveDate, Option<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| DataError::MalformedRow {
            path: p.clone(),
            line,
            msg,
        };
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[0], DATE_FMT)
            .map_err(|e| bad(format!("bad date {:?}: {e}", &rec[0])))?;
        let value = match &rec[1] {
            "" if channel == Channel::Vaccines => None,
            "" => return Err(bad(format!("empty value in {channel} series"))),
            s => {
                let v: f64 = s.parse().map_err(|e| bad(format!("bad value {s:?}: {e}")))?;
                if !v.is_finite() {
                    return Err(bad(format!("non-finite value {s:?}")));
                }
                Some(v)
            }
        };
        rows.push((date, value));
    }
    if rows.is_empty() {
        return Err(DataError::EmptySeries(channel));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(DataError::DuplicateDate { path: p, date: w[0].0 });
    }
    let (dates, values) = rows.into_iter().unzip();
    Ok(RawSeries::new(channel, dates, values))
}

/// Write a series in the canonical `date,value` form.
pub fn write_raw_csv(path: &Path, series: &RawSeries) -> Result<(), DataError> {
    let mut out = String::from("date,value\n");
    for (d, v) in series.dates.iter().zip(&series.values) {
        match v {
            Some(v) => out.push_str(&format!("{},{}\n", d.format(DATE_FMT), v)),
            None => out.push_str(&format!("{},\n", d.format(DATE_FMT))),
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// `(scaling, metadata)` sidecar paths for a dataset file:
/// `dataset.csv` pairs with `dataset.scaling.csv` and `dataset.meta.toml`.
pub fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let dir = path.parent().unwrap_or(Path::new(""));
    (dir.join(format!("{stem}.scaling.csv")), dir.join(format!("{stem}.meta.toml")))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Write the canonical dataset plus its scaling and metadata sidecars.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), DataError> {
    let mut out = DATASET_HEADER.join(",");
    out.push('\n');
    for week in 1..=dataset.weeks() {
        out.push_str(&week.to_string());
        for ch in Channel::ALL {
            out.push(',');
            out.push_str(&fmt_opt(dataset.value(ch, week)));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))?;

    let (scaling_path, meta_path) = sidecar_paths(path);
    let mut sc = String::from("channel,offset,scale\n");
    for ch in Channel::ALL {
        sc.push_str(&format!(
            "{},{},{}\n",
            ch,
            dataset.scaling.offset[ch.index()],
            dataset.scaling.scale[ch.index()]
        ));
    }
    fs::write(&scaling_path, sc).map_err(io_err(&scaling_path))?;

    let mut meta = format!("weeks = {}\n", dataset.weeks());
    if let Some(d) = dataset.start_date {
        meta.push_str(&format!("start_date = \"{}\"\n", d.format(DATE_FMT)));
    }
    fs::write(&meta_path, meta).map_err(io_err(&meta_path))
}

#[derive(serde::Deserialize)]
struct Meta {
    start_date: Option<String>,
}

/// Read a dataset written by [`write_dataset`]. The scaling sidecar is
/// required; the metadata sidecar is optional.
pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &DATASET_HEADER)?;
    let p = path.display().to_string();
    let mut cols: [Vec<(u32, f64)>; 5] = Default::default();
    for (expected_week, rec) in (1u32..).zip(rdr.records()) {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| DataError::MalformedRow {
            path: p.clone(),
            line,
            msg,
        };
        let week: u32 = rec[0].parse().map_err(|e| bad(format!("bad week {:?}: {e}", &rec[0])))?;
        if week != expected_week {
            return Err(bad(format!("expected week {expected_week}, found {week}")));
        }
        for ch in Channel::ALL {
            let s = &rec[ch.index() + 1];
            if s.is_empty() {
                continue;
            }
            let v: f64 = s.parse().map_err(|e| bad(format!("bad {ch} value {s:?}: {e}")))?;
            cols[ch.index()].push((week, v));
        }
    }
    let mut channels: [WeeklySeries; 5] = Default::default();
    for ch in Channel::ALL {
        let col = &cols[ch.index()];
        let start = col.first().map(|c| c.0).unwrap_or(1);
        if col.iter().enumerate().any(|(i, (w, _))| *w != start + i as u32) {
            return Err(DataError::Schema(format!("{p}: {ch} column has interior gaps")));
        }
        channels[ch.index()] = WeeklySeries::new(start, col.iter().map(|c| c.1).collect());
    }

    let (scaling_path, meta_path) = sidecar_paths(path);
    let scaling = read_scaling(&scaling_path)?;
    let start_date = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: Meta = toml::from_str(&text)
            .map_err(|e| DataError::Schema(format!("{}: {e}", meta_path.display())))?;
        meta.start_date
            .map(|s| NaiveDate::parse_from_str(&s, DATE_FMT))
            .transpose()
            .map_err(|e| DataError::Schema(format!("{}: {e}", meta_path.display())))?
    } else {
        None
    };
    Ok(Dataset::new(channels, scaling, start_date))
}

fn read_scaling(path: &Path) -> Result<ScalingSpec, DataError> {
    let mut rdr = open_csv(path)?;
    check_header(path, &mut rdr, &["channel", "offset", "scale"])?;
    let mut spec = ScalingSpec::identity();
    let mut seen = [false; 5];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| DataError::MalformedRow {
            path: path.display().to_string(),
            line,
            msg,
        };
        let ch = Channel::parse(&rec[0]).ok_or_else(|| bad(format!("unknown channel {:?}", &rec[0])))?;
        let offset: f64 = rec[1].parse().map_err(|e| bad(format!("{e}")))?;
        let scale: f64 = rec[2].parse().map_err(|e| bad(format!("{e}")))?;
        if !(scale > 0.0) {
            return Err(bad(format!("scale must be positive, got {scale}")));
        }
        spec.offset[ch.index()] = offset;
        spec.scale[ch.index()] = scale;
        seen[ch.index()] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(DataError::Schema(format!(
            "{}: no scaling row for {}",
            path.display(),
            Channel::ALL[i]
        )));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FMT).unwrap()
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_and_sorts() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.csv", "date,value\n2020-03-03,3\n2020-03-01,1\n2020-03-02,2\n");
        let s = load_csv(&p, Channel::Cases).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dates, [d("2020-03-01"), d("2020-03-02"), d("2020-03-03")]);
        assert_eq!(s.complete_values().unwrap(), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn vaccine_gap_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "v.csv", "date,value\n2021-01-01,10\n2021-01-02,\n2021-01-03,30\n");
        let s = load_csv(&p, Channel::Vaccines).unwrap();
        assert_eq!(s.values, [Some(10.0), None, Some(30.0)]);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_csv(&dir.path().join("nope.csv"), Channel::Cases), Err(DataError::MissingFile(_))));
        let p = write(dir.path(), "a.csv", "date,value\n2020-03-01,1\n2020-13-01,2\n");
        assert!(matches!(load_csv(&p, Channel::Cases), Err(DataError::MalformedRow { line: 3, .. })));
        let p = write(dir.path(), "b.csv", "date,value\n");
        assert!(matches!(load_csv(&p, Channel::Cases), Err(DataError::EmptySeries(Channel::Cases))));
        let p = write(dir.path(), "c.csv", "day,count\n2020-03-01,1\n");
        assert!(matches!(load_csv(&p, Channel::Cases), Err(DataError::BadHeader { .. })));
        let p = write(dir.path(), "e.csv", "date,value\n2020-03-01,\n");
        assert!(matches!(load_csv(&p, Channel::Deaths), Err(DataError::MalformedRow { .. })));
        let p = write(dir.path(), "f.csv", "date,value\n2020-03-01,1\n2020-03-01,2\n");
        assert!(matches!(load_csv(&p, Channel::Cases), Err(DataError::DuplicateDate { .. })));
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let full = |k: f64| WeeklySeries::new(1, vec![0.0, 0.25 * k, 1.0 / 3.0]);
        let data = Dataset::new(
            [full(1.0), full(2.0), WeeklySeries::new(3, vec![0.125]), full(3.0), full(0.5)],
            ScalingSpec {
                offset: [1.0, 2.0, 3.0, -40.5, 0.0],
                scale: [10.0, 20.0, 30.0, 12.25, 1e7],
            },
            Some(d("2020-03-07")),
        );
        let p = dir.path().join("dataset.csv");
        write_dataset(&p, &data).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("week,cases,deaths,hosp,mobility,vaccines\n1,0,0,,0,0\n"));
        assert_eq!(read_dataset(&p).unwrap(), data);
    }
}
