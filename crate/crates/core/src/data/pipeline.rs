use std::fmt;
use std::path::Path;

use chrono::NaiveDate;

use super::{
    aggregate_weekly, impute_vaccine, load_csv, moving_average_7d, normalize, trim_hospitalizations,
    truncate_after_week, Channel, DataError, Dataset, RawSeries, ScalingSpec, WeeklySeries,
    DEFAULT_CUTOFF_WEEK, HOSP_TRIM_WEEKS,
};

/// The five daily input series, one per channel.
#[derive(Debug, Clone)]
pub struct RawInputs {
    pub series: [RawSeries; 5],
}

impl RawInputs {
    pub fn new(series: [RawSeries; 5]) -> Result<Self, DataError> {
        for (s, ch) in series.iter().zip(Channel::ALL) {
            if s.channel != ch {
                return Err(DataError::WrongChannel {
                    expected: ch,
                    found: s.channel,
                });
            }
            if s.is_empty() {
                return Err(DataError::EmptySeries(ch));
            }
        }
        Ok(Self { series })
    }

    /// Load `cases.csv`, `deaths.csv`, `hosp.csv` (or `hospitalizations.csv`),
    /// `mobility.csv` and `vaccines.csv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, DataError> {
        let load = |ch: Channel| -> Result<RawSeries, DataError> {
            let mut path = dir.join(format!("{ch}.csv"));
            if ch == Channel::Hosp && !path.exists() {
                path = dir.join("hospitalizations.csv");
            }
            load_csv(&path, ch)
        };
        Self::new([
            load(Channel::Cases)?,
            load(Channel::Deaths)?,
            load(Channel::Hosp)?,
            load(Channel::Mobility)?,
            load(Channel::Vaccines)?,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessOptions {
    pub cutoff_week: u32,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            cutoff_week: DEFAULT_CUTOFF_WEEK,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSummary {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    /// First day of week 1 (the first smoothed day).
    pub week1_start: NaiveDate,
    pub weeks_available: u32,
    pub weeks_kept: u32,
    pub hosp_first_week: u32,
}

impl fmt::Display for PreprocessSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "daily axis      {} .. {}", self.first_day, self.last_day)?;
        writeln!(f, "week 1 begins   {}", self.week1_start)?;
        writeln!(f, "weeks available {}", self.weeks_available)?;
        writeln!(f, "weeks kept      {}", self.weeks_kept)?;
        write!(f, "hosp from week  {}", self.hosp_first_week)
    }
}

/// Align, smooth, aggregate, trim, truncate and normalize.
///
/// The daily axis runs from the latest first date to the earliest last date
/// among the four non-vaccine channels. Vaccines are imputed over their own
/// span extended to that axis and then cut to it.
pub fn preprocess(inputs: &RawInputs, opts: PreprocessOptions) -> Result<(Dataset, PreprocessSummary), DataError> {
    if opts.cutoff_week == 0 {
        return Err(DataError::Schema("cutoff week must be >= 1".into()));
    }
    let observed = &inputs.series[..4];
    let first = observed.iter().map(|s| s.dates[0]).max().unwrap();
    let last = observed.iter().map(|s| *s.dates.last().unwrap()).min().unwrap();
    if last < first {
        return Err(DataError::NoOverlap);
    }

    let mut daily: Vec<RawSeries> = observed.iter().map(|s| s.reindex_daily(first, last)).collect();
    let vax = &inputs.series[Channel::Vaccines.index()];
    let v_first = vax.dates[0].min(first);
    let v_last = (*vax.dates.last().unwrap()).max(last);
    let filled = impute_vaccine(&vax.reindex_daily(v_first, v_last))?;
    daily.push(filled.reindex_daily(first, last));

    let mut weekly: Vec<WeeklySeries> = Vec::with_capacity(5);
    for s in &daily {
        let smooth = moving_average_7d(s)?;
        weekly.push(aggregate_weekly(&smooth, s.channel.aggregation())?);
    }
    let weeks_available = weekly[0].len() as u32;
    weekly[Channel::Hosp.index()] = trim_hospitalizations(&weekly[Channel::Hosp.index()])?;

    let week1_start = first + chrono::Days::new(6);
    let channels: [WeeklySeries; 5] = weekly.try_into().expect("five channels");
    let raw = Dataset::new(channels, ScalingSpec::identity(), Some(week1_start));
    let cut = truncate_after_week(&raw, opts.cutoff_week);
    let (dataset, _) = normalize(&cut);

    let summary = PreprocessSummary {
        first_day: first,
        last_day: last,
        week1_start,
        weeks_available,
        weeks_kept: dataset.weeks(),
        hosp_first_week: 1 + HOSP_TRIM_WEEKS as u32,
    };
    Ok((dataset, summary))
}

pub fn preprocess_dir(dir: &Path, opts: PreprocessOptions) -> Result<(Dataset, PreprocessSummary), DataError> {
    preprocess(&RawInputs::load_dir(dir)?, opts)
}
