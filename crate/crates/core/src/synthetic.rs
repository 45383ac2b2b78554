//! Synthetic epidemics for end-to-end checks.
//!
//! A scenario file is plain `key = value` lines (`#` starts a comment):
//!
//! ```text
//! weeks = 60
//! noise = 0.02            # multiplicative, per observation
//! seed = 7
//! start_date = 2020-03-01
//! initial.X = 39506223    # also L, Y, Z, Zr, H, A, D, Dr
//! param.p_h = 0.06        # any RateParams field; `N` is the population
//! beta.base = 0.2
//! beta.bump = 0.16, 70, 35      # amplitude, centre day, width (repeatable)
//! beta.knot = 0, 0.3            # day, β (repeatable; replaces base/bumps)
//! mobility.base = 10      # mobility = base + slope·(β(t) - beta.base)
//! mobility.slope = -40
//! vaccines.total = 3e7    # logistic cumulative doses
//! vaccines.midpoint = 300
//! vaccines.width = 30
//! ```
//!
//! Week `k` reports the change of `Zr`, `Dr`, `A` over days `7(k-1)..7k`
//! and the covariates on day `7k`.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::compartment::{
    self as cm, integrate_rk4, BetaProfile, CompartmentState, ModelError, RateParams, TransmissionSignal,
    Trajectory, COMPARTMENT_NAMES,
};
use crate::data::{Channel, Dataset, ScalingSpec, WeeklySeries};

/// Integration step in days; divides a week exactly.
pub const SYNTH_DT: f64 = 0.125;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub weeks: u32,
    pub noise: f64,
    pub seed: u64,
    pub start_date: NaiveDate,
    pub initial: CompartmentState,
    pub rates: RateParams,
    pub beta: BetaProfile,
    pub mobility_base: f64,
    pub mobility_slope: f64,
    pub vaccine_total: f64,
    pub vaccine_midpoint: f64,
    pub vaccine_width: f64,
}

impl Default for Scenario {
    /// Two waves over 60 weeks, weekly cases roughly 10³ to 2·10⁴.
    fn default() -> Self {
        let rates = RateParams::default();
        let n = rates.population;
        Self {
            weeks: 60,
            noise: 0.0,
            seed: 0,
            start_date: NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date"),
            initial: CompartmentState([n - 6000.0, 3000.0, 3000.0, 300.0, 0.0, 100.0, 0.0, 20.0, 0.0]),
            rates,
            beta: BetaProfile::Bumps {
                base: 0.2,
                bumps: vec![(0.16, 70.0, 35.0), (0.2, 270.0, 35.0)],
            },
            mobility_base: 10.0,
            mobility_slope: -40.0,
            vaccine_total: 3.0e7,
            vaccine_midpoint: 300.0,
            vaccine_width: 30.0,
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SyntheticError> {
        let mut sc = Scenario::default();
        let mut base: Option<f64> = None;
        let mut bumps = Vec::new();
        let mut knots = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| SyntheticError::Parse { line, msg };
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, found {content:?}")))?;
            let num = |s: &str| -> Result<f64, SyntheticError> {
                s.trim().parse::<f64>().map_err(|e| err(format!("{key}: bad number {s:?}: {e}")))
            };
            let list = |n: usize| -> Result<Vec<f64>, SyntheticError> {
                let v: Vec<f64> = value.split(',').map(num).collect::<Result<_, _>>()?;
                if v.len() != n {
                    return Err(err(format!("{key}: expected {n} comma-separated numbers")));
                }
                Ok(v)
            };
            match key {
                "weeks" => sc.weeks = value.parse().map_err(|e| err(format!("weeks: {e}")))?,
                "noise" => sc.noise = num(value)?,
                "seed" => sc.seed = value.parse().map_err(|e| err(format!("seed: {e}")))?,
                "start_date" => {
                    sc.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|e| err(format!("start_date: {e}")))?
                }
                "beta.base" => base = Some(num(value)?),
                "beta.bump" => {
                    let v = list(3)?;
                    bumps.push((v[0], v[1], v[2]));
                }
                "beta.knot" => {
                    let v = list(2)?;
                    knots.push((v[0], v[1]));
                }
                "mobility.base" => sc.mobility_base = num(value)?,
                "mobility.slope" => sc.mobility_slope = num(value)?,
                "vaccines.total" => sc.vaccine_total = num(value)?,
                "vaccines.midpoint" => sc.vaccine_midpoint = num(value)?,
                "vaccines.width" => sc.vaccine_width = num(value)?,
                _ => {
                    if let Some(name) = key.strip_prefix("initial.") {
                        let idx = COMPARTMENT_NAMES
                            .iter()
                            .position(|c| c.eq_ignore_ascii_case(name))
                            .ok_or_else(|| err(format!("unknown compartment {name:?}")))?;
                        sc.initial.0[idx] = num(value)?;
                    } else if let Some(name) = key.strip_prefix("param.") {
                        let v = num(value)?;
                        let r = &mut sc.rates;
                        match name {
                            "N" | "population" => r.population = v,
                            "eta" => r.eta = v,
                            "gamma" => r.gamma = v,
                            "gamma_d" => r.gamma_d = v,
                            "gamma_z" => r.gamma_z = v,
                            "gamma_h" => r.gamma_h = v,
                            "rho" => r.rho = v,
                            "p_h" => r.p_h = v,
                            "p_d" => r.p_d = v,
                            _ => return Err(err(format!("unknown parameter {name:?}"))),
                        }
                    } else {
                        return Err(err(format!("unknown key {key:?}")));
                    }
                }
            }
        }
        if !knots.is_empty() {
            knots.sort_by(|a, b| a.0.total_cmp(&b.0));
            sc.beta = BetaProfile::PiecewiseLinear(knots);
        } else if base.is_some() || !bumps.is_empty() {
            let (old_base, old_bumps) = match &sc.beta {
                BetaProfile::Bumps { base, bumps } => (*base, bumps.clone()),
                _ => (0.0, Vec::new()),
            };
            sc.beta = BetaProfile::Bumps {
                base: base.unwrap_or(old_base),
                bumps: if bumps.is_empty() { old_bumps } else { bumps },
            };
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.weeks < 2 {
            return Err(SyntheticError::Invalid("weeks must be >= 2".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(SyntheticError::Invalid("noise must be >= 0".into()));
        }
        if !(self.vaccine_width > 0.0) {
            return Err(SyntheticError::Invalid("vaccines.width must be > 0".into()));
        }
        self.rates.validate()?;
        Ok(())
    }

    fn beta_ref(&self) -> f64 {
        match &self.beta {
            BetaProfile::Constant(b) => *b,
            BetaProfile::Bumps { base, .. } => *base,
            BetaProfile::PiecewiseLinear(k) => k.first().map(|k| k.1).unwrap_or(0.0),
        }
    }

    pub fn mobility(&self, t: f64) -> f64 {
        self.mobility_base + self.mobility_slope * (self.beta.beta(t) - self.beta_ref())
    }

    pub fn vaccines(&self, t: f64) -> f64 {
        self.vaccine_total / (1.0 + (-(t - self.vaccine_midpoint) / self.vaccine_width).exp())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Weekly observations in original units (identity scaling), every
    /// channel covering weeks `1..=weeks`.
    pub raw: Dataset,
    /// The same observations before noise.
    pub clean: Dataset,
    pub trajectory: Trajectory,
}

impl SyntheticData {
    /// Min–max scaled copy of the noisy observations.
    pub fn normalized(&self) -> Dataset {
        crate::data::normalize(&self.raw).0
    }
}

pub fn generate(scenario: &Scenario) -> Result<SyntheticData, SyntheticError> {
    scenario.validate()?;
    let weeks = scenario.weeks as usize;
    let t1 = 7.0 * weeks as f64;
    let traj = integrate_rk4(&scenario.initial, &scenario.beta, &scenario.rates, 0.0, t1, SYNTH_DT)?;
    let per_week = (7.0 / SYNTH_DT).round() as usize;
    let at = |k: usize| &traj.states[k * per_week].0;
    let mut clean: [Vec<f64>; 5] = Default::default();
    for k in 1..=weeks {
        let (prev, cur) = (at(k - 1), at(k));
        let t = 7.0 * k as f64;
        clean[0].push(cur[cm::ZR] - prev[cm::ZR]);
        clean[1].push(cur[cm::DR] - prev[cm::DR]);
        clean[2].push(cur[cm::A] - prev[cm::A]);
        clean[3].push(scenario.mobility(t));
        clean[4].push(scenario.vaccines(t));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noisy: [Vec<f64>; 5] = std::array::from_fn(|c| {
        clean[c]
            .iter()
            .map(|&v| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                v * (1.0 + scenario.noise * eps)
            })
            .collect()
    });
    let to_ds = |cols: &[Vec<f64>; 5]| {
        Dataset::new(
            std::array::from_fn(|c| WeeklySeries::new(1, cols[c].clone())),
            ScalingSpec::identity(),
            Some(scenario.start_date),
        )
    };
    Ok(SyntheticData {
        raw: to_ds(&noisy),
        clean: to_ds(&clean),
        trajectory: traj,
    })
}

/// Observed value of `ch` in `week` without noise, for convenience in tests.
pub fn clean_value(data: &SyntheticData, ch: Channel, week: u32) -> Option<f64> {
    data.clean.value(ch, week)
}
