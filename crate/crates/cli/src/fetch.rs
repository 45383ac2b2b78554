//! Best-effort download of the public source files via `curl`.

use std::path::Path;
use std::process::Command;

use anyhow::Result;

const SOURCES: [(&str, &str); 5] = [
    (
        "jhu_confirmed_US.csv",
        "https://raw.githubusercontent.com/CSSEGISandData/COVID-19/master/csse_covid_19_data/csse_covid_19_time_series/time_series_covid19_confirmed_US.csv",
    ),
    (
        "jhu_deaths_US.csv",
        "https://raw.githubusercontent.com/CSSEGISandData/COVID-19/master/csse_covid_19_data/csse_covid_19_time_series/time_series_covid19_deaths_US.csv",
    ),
    (
        "hhs_hospital_capacity.csv",
        "https://healthdata.gov/api/views/g62h-syeh/rows.csv?accessType=DOWNLOAD",
    ),
    (
        "Global_Mobility_Report.csv",
        "https://www.gstatic.com/covid19/mobility/Global_Mobility_Report.csv",
    ),
    (
        "govex_vaccine_timeline.csv",
        "https://raw.githubusercontent.com/govex/COVID-19/master/data_tables/vaccine_data/us_data/time_series/vaccine_data_us_timeline.csv",
    ),
];

/// Download every source into `dir/sources`. Failures are warnings.
pub fn fetch_all(dir: &Path) -> Result<usize> {
    let dest = dir.join("sources");
    std::fs::create_dir_all(&dest)?;
    let mut warnings = 0;
    for (name, url) in SOURCES {
        let path = dest.join(name);
        let status = Command::new("curl")
            .args(["-fsSL", "--retry", "2", "-o"])
            .arg(&path)
            .arg(url)
            .status();
        match status {
            Ok(s) if s.success() => println!("fetched {}", path.display()),
            Ok(s) => {
                eprintln!("warning: {url}: curl exited with {s}");
                warnings += 1;
            }
            Err(e) => {
                eprintln!("warning: could not run curl: {e}");
                warnings += 1;
            }
        }
    }
    println!("next: epipinn adapt --state <name> --jhu-cases ... then epipinn preprocess");
    Ok(warnings)
}
