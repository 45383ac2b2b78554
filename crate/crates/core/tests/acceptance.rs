//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails.
//!
//! Criterion 10 needs the real surveillance data and a long run; it only
//! executes when `EPIPINN_FULL_DATASET` points at a preprocessed dataset.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use epipinn_core::backtest::{rolling_backtest, scaled_origins, BacktestConfig};
use epipinn_core::compartment::{integrate_rk4, residual, TransmissionSignal, N_COMPARTMENTS};
use epipinn_core::data::{
    preprocess_dir, read_dataset, write_dataset, Channel, Dataset, PreprocessOptions, WeeklySeries,
    DEFAULT_CUTOFF_WEEK,
};
use epipinn_core::forecast::{PointForecast, Target};
use epipinn_core::neural::{forward, forward_with_time_grad, grad_params, init_params, MlpConfig, TrainConfig};
use epipinn_core::pinn::{initial_params, train, LossWeights, Objective, PinnConfig, TrainingWindow};
use epipinn_core::quantile::{build_quantile_forecast, gaussian_quantile, inverse_normal_cdf, QuantileForecast};
use epipinn_core::registry::{ForecasterRegistry, PinnForecaster};
use epipinn_core::scoring::{build_report, interval_score, naive_quantiles, wis, WIS_ALPHAS};
use epipinn_core::synthetic::{generate, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

const FD_H: f64 = 1e-5;

fn network_gradients() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for case in 0..100 {
        let cfg = MlpConfig::new(1, rng.random_range(0..4), rng.random_range(1..7), rng.random_range(1..5)).unwrap();
        let params = init_params(&cfg, case);
        let t: f64 = rng.random_range(-1.0..1.5);
        let up: Vec<f64> = (0..cfg.output_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = grad_params(&cfg, &params, t, &up).unwrap();
        let dot = |p: &[f64]| -> f64 { forward(&cfg, p, t).unwrap().iter().zip(&up).map(|(y, u)| y * u).sum() };
        for i in 0..params.len() {
            let mut pp = params.clone();
            pp[i] += FD_H;
            let plus = dot(&pp);
            pp[i] -= 2.0 * FD_H;
            let fd = (plus - dot(&pp)) / (2.0 * FD_H);
            if !close(g[i], fd, 1e-3, 1e-6) {
                return Err(format!("network case {case} param {i}: {} vs {fd}", g[i]));
            }
            checked += 1;
        }
        let (_, dy) = forward_with_time_grad(&cfg, &params, t).unwrap();
        let yp = forward(&cfg, &params, t + FD_H).unwrap();
        let ym = forward(&cfg, &params, t - FD_H).unwrap();
        for k in 0..cfg.output_dim {
            let fd = (yp[k] - ym[k]) / (2.0 * FD_H);
            if !close(dy[k], fd, 1e-3, 1e-6) {
                return Err(format!("network case {case} time output {k}: {} vs {fd}", dy[k]));
            }
        }
    }
    Ok(checked)
}

fn small_dataset(hosp_start: u32) -> Dataset {
    let data = generate(&Scenario {
        weeks: 14,
        noise: 0.02,
        seed: 11,
        ..Scenario::default()
    })
    .unwrap();
    let mut ds = data.normalized();
    let hosp = &mut ds.channels[Channel::Hosp.index()];
    let skip = (hosp_start - 1) as usize;
    *hosp = WeeklySeries::new(hosp_start, hosp.values[skip..].to_vec());
    ds
}

fn loss_gradients() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let datasets = [small_dataset(1), small_dataset(4)];
    let mut checked = 0;
    for case in 0..100u64 {
        let dataset = &datasets[(case % 2) as usize];
        let layers = rng.random_range(1..3);
        let width = rng.random_range(2..6);
        let mut weights = LossWeights {
            w_ode: rng.random_range(0.05..1.0),
            ..LossWeights::default()
        };
        for w in weights.equation.iter_mut().chain(weights.channel.iter_mut()) {
            *w = rng.random_range(0.5..2.0);
        }
        let config = PinnConfig {
            state_net: MlpConfig::new(1, layers, width, 9).unwrap(),
            factor_net: MlpConfig::new(1, layers, width, 3).unwrap(),
            weights,
            collocation_per_week: rng.random_range(1..4),
            ..PinnConfig::default()
        };
        let first = rng.random_range(1..4);
        let window = TrainingWindow::new(first, first + rng.random_range(3..8)).unwrap();
        let obj = Objective::new(dataset, &window, &config).unwrap();
        let mut params = initial_params(&config, case);
        let n = params.len();
        params[n - 2] = rng.random_range(-3.0..0.0);
        params[n - 1] = rng.random_range(-3.0..0.0);
        let mut grad = vec![0.0; n];
        obj.evaluate(&params, Some(&mut grad)).unwrap();
        let loss = |p: &[f64]| obj.evaluate(p, None).unwrap().total;
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for i in 0..n {
            let mut pp = params.clone();
            pp[i] += FD_H;
            let plus = loss(&pp);
            pp[i] -= 2.0 * FD_H;
            let fd = (plus - loss(&pp)) / (2.0 * FD_H);
            if !close(grad[i], fd, 1e-3, 1e-6 * gmax.max(1e-3)) {
                return Err(format!("loss case {case} param {i}/{n}: {} vs {fd}", grad[i]));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let a = network_gradients()?;
    let b = loss_gradients()?;
    let secs = t.elapsed().as_secs_f64();
    check(
        secs < 60.0,
        format!("{a} network and {b} loss partials within 1e-3 of finite differences in {secs:.1}s"),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let sc = Scenario::default();
    let dt = 0.01;
    let traj = integrate_rk4(&sc.initial, &sc.beta, &sc.rates, 0.0, 420.0, dt).map_err(|e| e.to_string())?;
    let n = traj.states.len();
    // per-compartment scale: largest |rhs| along the trajectory
    let mut scale = [0.0f64; N_COMPARTMENTS];
    let mut fs = Vec::with_capacity(n);
    for k in 1..n - 1 {
        let s = &traj.states[k];
        let d: [f64; N_COMPARTMENTS] =
            std::array::from_fn(|i| (traj.states[k + 1].0[i] - traj.states[k - 1].0[i]) / (2.0 * dt));
        let beta = sc.beta.beta(traj.times[k]);
        let f = residual(s, &d, beta, &sc.rates).map_err(|e| e.to_string())?;
        let r = epipinn_core::compartment::rhs(s, beta, &sc.rates).map_err(|e| e.to_string())?;
        for i in 0..N_COMPARTMENTS {
            scale[i] = scale[i].max(r[i].abs());
        }
        fs.push(f);
    }
    let max_f = fs
        .iter()
        .flat_map(|f| (0..N_COMPARTMENTS).map(move |i| (i, f[i])))
        .map(|(i, v)| v.abs() / scale[i])
        .fold(0.0, f64::max);

    let t1 = 140.0;
    let reference = integrate_rk4(&sc.initial, &sc.beta, &sc.rates, 0.0, t1, 1.0 / 64.0)
        .map_err(|e| e.to_string())?
        .last()
        .1;
    let err = |h: f64| -> Result<f64, String> {
        let end = integrate_rk4(&sc.initial, &sc.beta, &sc.rates, 0.0, t1, h)
            .map_err(|e| e.to_string())?
            .last()
            .1;
        Ok((0..N_COMPARTMENTS)
            .map(|i| (end.0[i] - reference.0[i]).abs() / reference.0[i].abs().max(1.0))
            .fold(0.0, f64::max))
    };
    let (e1, e2) = (err(1.0)?, err(0.5)?);
    let order = (e1 / e2).log2();
    check(
        max_f < 1e-3 && (3.5..=4.5).contains(&order),
        format!("max normalized |f| = {max_f:.2e}, RK4 order {order:.2}"),
    )
}

// ---------------------------------------------------------------- 3

/// Weeks used for the recovery check; the early weeks of the default
/// scenario carry almost no vaccine signal.
const RECOVERY_WEEKS: (u32, u32) = (21, 44);

fn criterion_3() -> Outcome {
    let data = generate(&Scenario::default()).map_err(|e| e.to_string())?;
    let ds = data.normalized();
    let window = TrainingWindow::new(RECOVERY_WEEKS.0, RECOVERY_WEEKS.1).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let out = train(
        &ds,
        &window,
        &PinnConfig::default(),
        &TrainConfig {
            epochs: 5000,
            seed: 1,
            ..TrainConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for ch in Channel::ALL {
        let (mut num, mut den) = (0.0, 0.0);
        for wk in RECOVERY_WEEKS.0..=RECOVERY_WEEKS.1 {
            let p = out.model.observables_raw(wk).map_err(|e| e.to_string())?[ch.index()];
            let y = data.clean.raw_value(ch, wk).unwrap();
            num += (p - y) * (p - y);
            den += y * y;
        }
        let rel = (num / den).sqrt();
        worst = worst.max(rel);
        parts.push(format!("{ch} {:.2}%", 100.0 * rel));
    }
    check(
        worst < 0.05 && secs < 300.0,
        format!(
            "weeks {}..={}: {} in {secs:.0}s",
            RECOVERY_WEEKS.0,
            RECOVERY_WEEKS.1,
            parts.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let data = generate(&Scenario {
        weeks: 60,
        noise: 0.02,
        seed: 7,
        ..Scenario::default()
    })
    .map_err(|e| e.to_string())?;
    let ds = data.normalized();
    let (first_origin, last_origin) = scaled_origins(60);
    let cfg = BacktestConfig {
        first_origin,
        last_origin,
        workers: 4,
        seed: 0,
        ..BacktestConfig::default()
    };
    let pinn = PinnForecaster::new(
        PinnConfig::default(),
        TrainConfig {
            epochs: 5000,
            ..TrainConfig::default()
        },
    );
    let t = Instant::now();
    let res = rolling_backtest(&pinn, &ds, &cfg).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let q = res.quantiles(&ds).map_err(|e| e.to_string())?;
    let report = build_report(&[("pinn".into(), q)], &ds).map_err(|e| e.to_string())?;
    let mut ok = res.failures.is_empty() && secs < 1800.0;
    let mut parts = Vec::new();
    for t in Target::ALL {
        let m = report.get("pinn", t, 1).map(|r| r.mase).unwrap_or(f64::INFINITY);
        ok &= m < 1.0;
        parts.push(format!("{t} {m:.3}"));
    }
    check(
        ok,
        format!(
            "origins {first_origin}..={last_origin}, h=1 MASE {}; {} failed windows; {secs:.0}s",
            parts.join(", "),
            res.failures.len()
        ),
    )
}

// ---------------------------------------------------------------- 5

/// WIS through the pinball loss over all 23 levels, written without the
/// interval decomposition.
fn reference_wis(q: &QuantileForecast, y: f64) -> f64 {
    let pinball = |tau: f64, v: f64| {
        let e = y - v;
        if e >= 0.0 {
            tau * e
        } else {
            (tau - 1.0) * e
        }
    };
    let s: f64 = q.levels.iter().zip(&q.values).map(|(&l, &v)| pinball(l, v)).sum();
    s / (WIS_ALPHAS.len() as f64 + 0.5)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_mass = 0.0f64;
    for _ in 0..1000 {
        let m: f64 = rng.random_range(-1e4..1e4);
        let y: f64 = rng.random_range(-1e4..1e4);
        let q = QuantileForecast {
            target: Target::Cases,
            horizon: 1,
            origin_week: 1,
            mu: m,
            sigma: 0.0,
            levels: epipinn_core::quantile::HUB_LEVELS.to_vec(),
            values: vec![m; 23],
        };
        let w = wis(&q, y).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((w - (y - m).abs()).abs() / (y - m).abs().max(1.0));
    }
    let is = |l, u, a, y| interval_score(l, u, a, y).unwrap();
    let hand = [
        (is(1.0, 3.0, 0.2, 2.0), 2.0),
        (is(1.0, 3.0, 0.2, 4.0), 12.0),
        (is(1.0, 3.0, 0.5, 0.0), 6.0),
    ];
    let hand_ok = hand.iter().all(|(a, b)| (a - b).abs() < 1e-12);
    let mut worst_ref = 0.0f64;
    for _ in 0..20 {
        let p = PointForecast {
            target: Target::Deaths,
            horizon: 2,
            origin_week: 5,
            value: rng.random_range(10.0..1e4),
        };
        let q = build_quantile_forecast(&p, rng.random_range(0.0..2e3)).map_err(|e| e.to_string())?;
        let y: f64 = rng.random_range(0.0..2e4);
        let a = wis(&q, y).map_err(|e| e.to_string())?;
        worst_ref = worst_ref.max((a - reference_wis(&q, y)).abs() / a.abs().max(1.0));
    }
    check(
        worst_mass <= 1e-12 && hand_ok && worst_ref <= 1e-9,
        format!(
            "point-mass deviation {worst_mass:.1e}, hand examples {}, reference scorer deviation {worst_ref:.1e}",
            if hand_ok { "match" } else { "differ" }
        ),
    )
}

// ---------------------------------------------------------------- 6

/// Standard normal CDF from the series and continued fraction of erfc.
fn phi(x: f64) -> f64 {
    let a = x.abs() / std::f64::consts::SQRT_2;
    let erfc = if a < 3.0 {
        // erf(a) = 2/sqrt(pi) e^{-a^2} sum 2^n a^{2n+1} / (1·3···(2n+1))
        let mut term = a;
        let mut sum = a;
        let mut n = 0.0;
        while term > 1e-18 * sum {
            n += 1.0;
            term *= 2.0 * a * a / (2.0 * n + 1.0);
            sum += term;
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * (-a * a).exp() * sum
    } else {
        // erfc(a) = e^{-a^2}/sqrt(pi) · 1/(a + (1/2)/(a + 1/(a + (3/2)/(a + ...))))
        let mut frac = 0.0;
        for k in (1..200).rev() {
            frac = (k as f64 / 2.0) / (a + frac);
        }
        (-a * a).exp() / std::f64::consts::PI.sqrt() / (a + frac)
    };
    if x >= 0.0 {
        1.0 - 0.5 * erfc
    } else {
        0.5 * erfc
    }
}

fn bisect(p: f64) -> f64 {
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_6() -> Outcome {
    let n = 10_000;
    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    let mut worst_p = 0.0f64;
    let mut worst_z = 0.0f64;
    for i in 0..n {
        let p = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let z = inverse_normal_cdf(p).map_err(|e| e.to_string())?;
        worst_p = worst_p.max((phi(z) - p).abs());
        worst_z = worst_z.max((z - bisect(p)).abs());
    }
    let q = gaussian_quantile(0.0, 1.0, 0.975).map_err(|e| e.to_string())?;
    check(
        worst_p < 1e-9 && (q - 1.95996).abs() <= 1e-4,
        format!("max |Phi(z)-p| = {worst_p:.1e} (max |z - bisection| {worst_z:.1e}), q(0.975) = {q:.6}"),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cells = 0;
    for set in 0..20 {
        let weeks = rng.random_range(12..60);
        let mut series = |scale: f64| {
            WeeklySeries::new(1, (0..weeks).map(|_| scale * rng.random_range(0.0..1.0f64)).collect())
        };
        let (c, d, h) = (series(1e4), series(100.0), series(1e3));
        let ds = Dataset::new(
            [c, d, h, WeeklySeries::new(1, vec![0.0; weeks]), WeeklySeries::new(1, vec![0.0; weeks])],
            epipinn_core::data::ScalingSpec::identity(),
            None,
        );
        let first = rng.random_range(4..weeks as u32 / 2);
        let last = rng.random_range(first..weeks as u32);
        let q = naive_quantiles(&ds, first..=last, &[1, 2, 3, 4]).map_err(|e| e.to_string())?;
        let report = build_report(&[("naive".into(), q)], &ds).map_err(|e| format!("set {set}: {e}"))?;
        for r in &report.rows {
            if r.mase != 1.0 || r.scaled_wis != 1.0 {
                return Err(format!("set {set}: {r:?}"));
            }
            cells += 1;
        }
    }
    Ok(format!("MASE and scaled WIS exactly 1.0 in {cells} cells over 20 random evaluation sets"))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let datasets = [small_dataset(1), small_dataset(4)];
    for case in 0..50u64 {
        let config = PinnConfig {
            weights: LossWeights {
                w_ode: 0.0,
                ..LossWeights::default()
            },
            ..PinnConfig::default()
        };
        let first = rng.random_range(1..5);
        let window = TrainingWindow::new(first, first + rng.random_range(3..9)).unwrap();
        let obj = Objective::new(&datasets[(case % 2) as usize], &window, &config).map_err(|e| e.to_string())?;
        let params: Vec<f64> = initial_params(&config, case)
            .iter()
            .map(|p| p * rng.random_range(0.5..3.0))
            .collect();
        let parts = obj.evaluate(&params, None).map_err(|e| e.to_string())?;
        if parts.total.to_bits() != parts.data.to_bits() {
            return Err(format!("case {case}: total {} != data {}", parts.total, parts.data));
        }
    }
    let ds = small_dataset(1);
    let window = TrainingWindow::new(2, 12).unwrap();
    let norm = |l2: f64| -> Result<f64, String> {
        let out = train(
            &ds,
            &window,
            &PinnConfig::default(),
            &TrainConfig {
                epochs: 2000,
                l2_coefficient: l2,
                seed: 3,
                ..TrainConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        Ok(out.model.params.iter().map(|p| p * p).sum::<f64>().sqrt())
    };
    let (with, without) = (norm(1e-3)?, norm(0.0)?);
    check(
        with < without,
        format!("w_ODE=0 total bit-equal to data loss on 50 models; parameter norm {with:.3} (l2=1e-3) vs {without:.3} (l2=0)"),
    )
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/preprocess");
    let (ds, summary) = preprocess_dir(
        &fixture.join("raw"),
        PreprocessOptions {
            cutoff_week: DEFAULT_CUTOFF_WEEK,
        },
    )
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_dataset(&dir.path().join("dataset.csv"), &ds).map_err(|e| e.to_string())?;
    let mut same = true;
    for name in ["dataset.csv", "dataset.scaling.csv", "dataset.meta.toml"] {
        let got = std::fs::read(dir.path().join(name)).map_err(|e| e.to_string())?;
        let want = std::fs::read(fixture.join("golden").join(name)).map_err(|e| e.to_string())?;
        same &= got == want;
    }
    let hosp_start = ds.channel(Channel::Hosp).start_week;
    check(
        same && hosp_start == 21 && ds.weeks() == 110 && summary.weeks_available > 110,
        format!(
            "{} of {} weeks kept, hosp from week {hosp_start}, golden files {}",
            ds.weeks(),
            summary.weeks_available,
            if same { "identical" } else { "differ" }
        ),
    )
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Option<Outcome> {
    let path = std::env::var_os("EPIPINN_FULL_DATASET")?;
    let run = || -> Outcome {
        let ds = read_dataset(std::path::Path::new(&path)).map_err(|e| e.to_string())?;
        let registry = ForecasterRegistry::with_builtins(&PinnConfig::default(), &TrainConfig::default());
        let pinn = registry.get("pinn").map_err(|e| e.to_string())?;
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let cfg = BacktestConfig {
            workers,
            ..BacktestConfig::default()
        };
        let res = rolling_backtest(pinn.as_ref(), &ds, &cfg).map_err(|e| e.to_string())?;
        let q = res.quantiles(&ds).map_err(|e| e.to_string())?;
        let report = build_report(&[(pinn.name().to_string(), q)], &ds).map_err(|e| e.to_string())?;
        let cases = report.get("pinn", Target::Cases, 1).map(|r| r.mase).unwrap_or(f64::NAN);
        let hosp = report.get("pinn", Target::Hosp, 1).map(|r| r.mase).unwrap_or(f64::NAN);
        check(
            (cases - 0.75).abs() <= 0.15 && (hosp - 0.58).abs() <= 0.15,
            format!("h=1 MASE cases {cases:.3} (target 0.75 ± 0.15), hosp {hosp:.3} (target 0.58 ± 0.15)"),
        )
    };
    Some(run())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("autodiff exactness", criterion_1),
        ("residual oracle and RK4 order", criterion_2),
        ("synthetic recovery", criterion_3),
        ("synthetic backtest beats naive", criterion_4),
        ("scoring exactness", criterion_5),
        ("quantile math", criterion_6),
        ("naive identities", criterion_7),
        ("ablation identity and L2 effect", criterion_8),
        ("preprocessing goldens", criterion_9),
    ];
    let only: Option<Vec<usize>> = std::env::var("EPIPINN_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    let started = Instant::now();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            println!("criterion {n:>2} SKIP {name}: not selected");
            continue;
        }
        let t = Instant::now();
        match f() {
            Ok(detail) => println!("criterion {n:>2} PASS {name}: {detail} [{}]", fmt_dur(t.elapsed())),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {detail} [{}]", fmt_dur(t.elapsed()))
            }
        }
    }
    match criterion_10() {
        None => println!(
            "criterion 10 SKIP full-data run (advisory): set EPIPINN_FULL_DATASET to a preprocessed dataset"
        ),
        Some(Ok(d)) => println!("criterion 10 PASS full-data run (advisory): {d}"),
        Some(Err(d)) => println!("criterion 10 FAIL full-data run (advisory, non-gating): {d}"),
    }
    println!("acceptance: {failed} gating failure(s) in {}", fmt_dur(started.elapsed()));
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fmt_dur(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}
