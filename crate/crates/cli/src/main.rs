use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use epipinn_core::backtest::{
    read_forecasts_csv, rolling_backtest, rows_to_points, study_origins, window_length_study, write_forecasts_csv,
    BacktestResult, STUDY_LENGTHS,
};
use epipinn_core::config::RunConfig;
use epipinn_core::data::{
    adapters, preprocess_dir, read_dataset, write_dataset, write_raw_csv, Channel, Dataset, PreprocessOptions,
    DEFAULT_CUTOFF_WEEK,
};
use epipinn_core::export::export_plots;
use epipinn_core::manifest::{now_utc, DatasetSpan, RunManifest};
use epipinn_core::quantile::{causal_quantiles, read_hub_csv, write_hub_csv, QuantileForecast};
use epipinn_core::registry::ForecasterRegistry;
use epipinn_core::scoring::{build_report, ScoreReport};
use epipinn_core::synthetic::{generate, Scenario};

mod fetch;

#[derive(Parser)]
#[command(name = "epipinn", version, about = "Physics-informed epidemic forecasting")]
struct Cli {
    /// Directory for outputs.
    #[arg(long, global = true, env = "EPIPINN_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a directory of daily CSVs into the weekly dataset.
    Preprocess {
        /// Directory holding cases.csv, deaths.csv, hosp.csv, mobility.csv, vaccines.csv.
        #[arg(long)]
        raw_dir: PathBuf,
        /// Output dataset path (default: <out-dir>/dataset.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CUTOFF_WEEK)]
        cutoff_week: u32,
    },
    /// Convert upstream public files into the daily CSVs `preprocess` reads.
    Adapt(AdaptArgs),
    /// Simulate a synthetic epidemic and write it as a dataset.
    Synth {
        /// Scenario file of `key = value` lines; defaults apply otherwise.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        weeks: Option<u32>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output dataset path (default: <out-dir>/dataset.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rolling-origin backtest with forecasts, quantiles, scores and a manifest.
    Backtest {
        #[arg(long)]
        dataset: PathBuf,
        /// Methods to run, comma separated (pinn, nn, naive).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare trailing training-window lengths.
    WindowStudy {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = STUDY_LENGTHS.to_vec())]
        lengths: Vec<u32>,
        /// Method to study (default: the config's).
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score forecast files (backtest or hub format) against a dataset.
    Score {
        #[arg(long, num_args = 1.., required = true)]
        forecasts: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Write long-format plot tables from a report and forecast files.
    ExportPlots {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        forecasts: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Download the public source files (needs curl and network access).
    Fetch,
}

#[derive(Args)]
struct AdaptArgs {
    /// US state name, e.g. California.
    #[arg(long)]
    state: String,
    /// State code used by the HHS file, e.g. CA.
    #[arg(long)]
    hhs_state: String,
    /// Mobility sub_region_1; defaults to the state.
    #[arg(long)]
    region: Option<String>,
    #[arg(long)]
    jhu_cases: PathBuf,
    #[arg(long)]
    jhu_deaths: PathBuf,
    #[arg(long)]
    hhs: PathBuf,
    #[arg(long)]
    mobility: PathBuf,
    #[arg(long)]
    vaccines: PathBuf,
    /// Output directory (default: <out-dir>/raw).
    #[arg(long)]
    raw_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablation {
    None,
    Nn,
}

/// Overrides applied on top of the config file.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    w_ode: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    window_length: Option<u32>,
    #[arg(long, value_enum)]
    ablation: Option<Ablation>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    first_origin: Option<u32>,
    #[arg(long)]
    last_origin: Option<u32>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.seed = self.seed.unwrap_or(c.seed);
        c.epochs = self.epochs.unwrap_or(c.epochs);
        c.w_ode = self.w_ode.unwrap_or(c.w_ode);
        c.l2_coefficient = self.l2.unwrap_or(c.l2_coefficient);
        c.window_length = self.window_length.or(c.window_length);
        c.workers = self.workers.unwrap_or(c.workers);
        c.first_origin = self.first_origin.or(c.first_origin);
        c.last_origin = self.last_origin.or(c.last_origin);
        if let Some(Ablation::Nn) = self.ablation {
            if c.method == "pinn" {
                c.method = "nn".into();
            }
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(warnings) => {
            if warnings > 0 {
                eprintln!("finished with {warnings} warning(s)");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Runs the command and returns its warning count.
fn run(cli: Cli) -> Result<usize> {
    let out_dir = cli.out_dir;
    let mkdir = |p: &Path| std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()));
    match cli.command {
        Command::Preprocess {
            raw_dir,
            out,
            cutoff_week,
        } => {
            let out = out.unwrap_or_else(|| out_dir.join("dataset.csv"));
            let (ds, summary) = preprocess_dir(&raw_dir, PreprocessOptions { cutoff_week })?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                mkdir(parent)?;
            }
            write_dataset(&out, &ds)?;
            println!("{summary}");
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Adapt(a) => {
            let dir = a.raw_dir.clone().unwrap_or_else(|| out_dir.join("raw"));
            mkdir(&dir)?;
            let region = a.region.as_deref().unwrap_or(&a.state);
            let series = [
                adapters::jhu_csse_wide(&a.jhu_cases, &a.state, Channel::Cases)?,
                adapters::jhu_csse_wide(&a.jhu_deaths, &a.state, Channel::Deaths)?,
                adapters::hhs_admissions(&a.hhs, &a.hhs_state)?,
                adapters::google_mobility(&a.mobility, region)?,
                adapters::govex_vaccines(&a.vaccines, &a.state)?,
            ];
            for s in &series {
                let p = dir.join(format!("{}.csv", s.channel));
                write_raw_csv(&p, s)?;
                println!("{:<9} {} days -> {}", s.channel, s.len(), p.display());
            }
            Ok(0)
        }
        Command::Synth {
            scenario,
            weeks,
            noise,
            seed,
            out,
        } => {
            let mut sc = match scenario {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    Scenario::parse(&text).with_context(|| p.display().to_string())?
                }
                None => Scenario::default(),
            };
            sc.weeks = weeks.unwrap_or(sc.weeks);
            sc.noise = noise.unwrap_or(sc.noise);
            sc.seed = seed.unwrap_or(sc.seed);
            let data = generate(&sc)?;
            let out = out.unwrap_or_else(|| out_dir.join("dataset.csv"));
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                mkdir(parent)?;
            }
            write_dataset(&out, &data.normalized())?;
            println!("{} weeks, noise {}, seed {} -> {}", sc.weeks, sc.noise, sc.seed, out.display());
            Ok(0)
        }
        Command::Backtest { dataset, methods, run } => {
            mkdir(&out_dir)?;
            cmd_backtest(&dataset, methods, &run, &out_dir)
        }
        Command::WindowStudy {
            dataset,
            lengths,
            method,
            run,
        } => {
            mkdir(&out_dir)?;
            cmd_window_study(&dataset, &lengths, method, &run, &out_dir)
        }
        Command::Score { forecasts, truth } => {
            mkdir(&out_dir)?;
            let ds = read_dataset(&truth)?;
            let methods = load_forecast_files(&forecasts, &ds)?;
            let report = build_report(&methods, &ds)?;
            let path = out_dir.join("report.csv");
            report.write_csv(&path)?;
            print!("{}", report.to_table());
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::ExportPlots {
            report,
            forecasts,
            truth,
        } => {
            mkdir(&out_dir)?;
            let ds = read_dataset(&truth)?;
            let report = ScoreReport::read_csv(&report)?;
            let methods = load_forecast_files(&forecasts, &ds)?;
            for p in export_plots(&out_dir, &report, &methods, &ds)? {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Fetch => {
            mkdir(&out_dir)?;
            fetch::fetch_all(&out_dir)
        }
    }
}

fn build_id() -> String {
    let version = env!("CARGO_PKG_VERSION");
    let rev = std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string());
    match rev {
        Some(r) if !r.is_empty() => format!("{version}+{r}"),
        _ => version.to_string(),
    }
}

fn new_manifest(command: &str, cfg: &RunConfig, dataset: &Path, ds: &Dataset) -> RunManifest {
    RunManifest {
        command: command.into(),
        config_digest: cfg.digest(),
        seed_policy: format!(
            "window at origin o trains with seed {} + o; a diverged window retries once with a salted seed",
            cfg.seed
        ),
        dataset: Some(DatasetSpan {
            path: dataset.display().to_string(),
            weeks: ds.weeks(),
            start_date: ds.start_date.map(|d| d.to_string()),
        }),
        build: build_id(),
        started_at: now_utc(),
        finished_at: String::new(),
        outputs: Vec::new(),
        failures: Vec::new(),
        warnings: 0,
    }
}

fn cmd_backtest(dataset: &Path, methods: Vec<String>, run: &RunArgs, out_dir: &Path) -> Result<usize> {
    let mut cfg = run.resolve()?;
    let ds = read_dataset(dataset)?;
    let methods = if methods.is_empty() { vec![cfg.method.clone()] } else { methods };
    let methods: Vec<String> = methods
        .into_iter()
        .map(|m| match run.ablation {
            Some(Ablation::Nn) if m == "pinn" => "nn".to_string(),
            _ => m,
        })
        .collect();
    cfg.method = methods.join(",");
    let registry = ForecasterRegistry::with_builtins(&cfg.pinn_config(), &cfg.train_config());
    let bt = cfg.backtest_config(ds.weeks());
    let mut manifest = new_manifest("backtest", &cfg, dataset, &ds);
    std::fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
    manifest.add_output(&out_dir.join("config.toml"), out_dir)?;
    eprintln!(
        "origins {}..={}, {} epochs, {} worker(s)",
        bt.first_origin, bt.last_origin, cfg.epochs, bt.workers
    );
    let mut scored = Vec::new();
    for m in &methods {
        let f = registry.get(m)?;
        let started = std::time::Instant::now();
        let result = rolling_backtest(f.as_ref(), &ds, &bt)?;
        eprintln!(
            "{m}: {} windows in {:.1?}, {} failed",
            result.records.len(),
            started.elapsed(),
            result.failures.len()
        );
        let q = write_method_outputs(&result, &ds, out_dir, &mut manifest)?;
        scored.push((m.clone(), q));
        for f in &result.failures {
            eprintln!("warning: {m} origin {} failed: {}", f.origin_week, f.error);
        }
        manifest.failures.extend(result.failures);
    }
    let report = build_report(&scored, &ds)?;
    let path = out_dir.join("report.csv");
    report.write_csv(&path)?;
    manifest.add_output(&path, out_dir)?;
    print!("{}", report.to_table());
    manifest.warnings += manifest.failures.len();
    manifest.finished_at = now_utc();
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest.warnings)
}

fn write_method_outputs(
    result: &BacktestResult,
    ds: &Dataset,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<Vec<QuantileForecast>> {
    let m = &result.method;
    let fpath = out_dir.join(format!("forecasts_{m}.csv"));
    write_forecasts_csv(&fpath, result)?;
    manifest.add_output(&fpath, out_dir)?;
    let q = result.quantiles(ds)?;
    match ds.start_date {
        Some(start) => {
            let qpath = out_dir.join(format!("quantiles_{m}.csv"));
            write_hub_csv(&qpath, &q, start)?;
            manifest.add_output(&qpath, out_dir)?;
        }
        None => {
            eprintln!("warning: dataset has no start date; skipping the hub quantile file");
            manifest.warnings += 1;
        }
    }
    Ok(q)
}

fn cmd_window_study(
    dataset: &Path,
    lengths: &[u32],
    method: Option<String>,
    run: &RunArgs,
    out_dir: &Path,
) -> Result<usize> {
    let mut cfg = run.resolve()?;
    if let Some(m) = method {
        cfg.method = m;
    }
    let ds = read_dataset(dataset)?;
    let registry = ForecasterRegistry::with_builtins(&cfg.pinn_config(), &cfg.train_config());
    let f = registry.get(&cfg.method)?;
    let mut bt = cfg.backtest_config(ds.weeks());
    let (a, b) = study_origins(ds.weeks());
    bt.first_origin = cfg.first_origin.unwrap_or(a);
    bt.last_origin = cfg.last_origin.unwrap_or(b);
    let mut manifest = new_manifest("window-study", &cfg, dataset, &ds);
    let runs = window_length_study(f.as_ref(), &ds, lengths, &bt)?;
    let path = out_dir.join("window_study.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["length", "target", "horizon", "mase", "wis", "scaled_wis", "n_evaluated"])?;
    for (n, result, report) in &runs {
        for r in &report.rows {
            w.write_record([
                n.to_string(),
                r.target.name().to_string(),
                r.horizon.to_string(),
                r.mase.to_string(),
                r.wis.to_string(),
                r.scaled_wis.to_string(),
                r.n_evaluated.to_string(),
            ])?;
        }
        print!("{}", report.to_table());
        manifest.failures.extend(result.failures.iter().cloned());
    }
    w.flush()?;
    manifest.add_output(&path, out_dir)?;
    manifest.warnings += manifest.failures.len();
    manifest.finished_at = now_utc();
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(manifest.warnings)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Method name from a file name: `forecasts_pinn.csv` and `quantiles_pinn.csv`
/// both give `pinn`.
fn method_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    ["forecasts_", "quantiles_"]
        .iter()
        .find_map(|p| stem.strip_prefix(p))
        .unwrap_or(&stem)
        .to_string()
}

fn load_forecast_files(paths: &[PathBuf], ds: &Dataset) -> Result<Vec<(String, Vec<QuantileForecast>)>> {
    let mut out = Vec::new();
    for p in paths {
        let header = std::fs::read_to_string(p)
            .with_context(|| format!("reading {}", p.display()))?
            .lines()
            .next()
            .unwrap_or_default()
            .to_string();
        let q = if header.starts_with("origin_week,") {
            let rows = read_forecasts_csv(p)?;
            causal_quantiles(&rows_to_points(&rows), ds)?
        } else if header.starts_with("forecast_date,") {
            let Some(start) = ds.start_date else {
                bail!("{}: hub files need a dataset with a start date", p.display());
            };
            read_hub_csv(p, start)?
        } else {
            bail!("{}: unrecognised forecast file header `{header}`", p.display());
        };
        out.push((method_name(p), q));
    }
    Ok(out)
}
