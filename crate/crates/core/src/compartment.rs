//! Nine-compartment transmission model.
//!
//! Compartments, in vector order:
//!
//! | idx | name | meaning |
//! |-----|------|---------|
//! | 0 | `X`  | susceptible |
//! | 1 | `L`  | latent, not yet infectious |
//! | 2 | `Y`  | infectious |
//! | 3 | `Z`  | diagnosed, awaiting report |
//! | 4 | `Zr` | cumulative reported cases |
//! | 5 | `H`  | hospitalized |
//! | 6 | `A`  | cumulative hospital admissions |
//! | 7 | `D`  | dead, awaiting report |
//! | 8 | `Dr` | cumulative reported deaths |
//!
//! Flows (per day):
//!
//! ```text
//! X' = -β X Y / N
//! L' =  β X Y / N - η L
//! Y' =  η L - γ Y
//! Z' =  ρ γ Y - γz Z        Zr' = γz Z
//! H' =  ph γ Y - γh H       A'  = ph γ Y
//! D' =  pd γh H - γd D      Dr' = γd D
//! ```
//!
//! Case reporting and hospitalization are independent taggings of the
//! removal flow `γ Y`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_COMPARTMENTS: usize = 9;

pub const X: usize = 0;
pub const L: usize = 1;
pub const Y: usize = 2;
pub const Z: usize = 3;
pub const ZR: usize = 4;
pub const H: usize = 5;
pub const A: usize = 6;
pub const D: usize = 7;
pub const DR: usize = 8;

pub const COMPARTMENT_NAMES: [&str; N_COMPARTMENTS] = ["X", "L", "Y", "Z", "Zr", "H", "A", "D", "Dr"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite input to the compartment model")]
    NonFiniteInput,
    #[error("integration diverged at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid integration span: t0 = {t0}, t1 = {t1}, dt = {dt}")]
    InvalidSpan { t0: f64, t1: f64, dt: f64 },
    #[error("invalid rate parameters: {0}")]
    InvalidParams(String),
}

/// State of all nine compartments, in persons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompartmentState(pub [f64; N_COMPARTMENTS]);

impl CompartmentState {
    pub fn zeros() -> Self {
        Self([0.0; N_COMPARTMENTS])
    }

    /// Entire population susceptible.
    pub fn susceptible(population: f64) -> Self {
        let mut s = Self::zeros();
        s.0[X] = population;
        s
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Fixed rates of the model plus the two estimated probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// Population size `N`.
    pub population: f64,
    /// Incubation rate η.
    pub eta: f64,
    /// Removal rate γ.
    pub gamma: f64,
    /// Death-report rate γd.
    pub gamma_d: f64,
    /// Case-report rate γz.
    pub gamma_z: f64,
    /// Hospital exit rate γh.
    pub gamma_h: f64,
    /// Probability that a removal is reported as a case.
    pub rho: f64,
    /// Probability of an infection leading to hospitalization.
    pub p_h: f64,
    /// Probability of a hospitalization leading to death.
    pub p_d: f64,
}

impl Default for RateParams {
    /// California population and literature rates; `p_h` and `p_d` are
    /// placeholders since the forecaster estimates them.
    fn default() -> Self {
        Self {
            population: 39_512_223.0,
            eta: 0.25,
            gamma: 0.25,
            gamma_d: 0.1,
            gamma_z: 1.0,
            gamma_h: 0.1,
            rho: 0.5,
            p_h: 0.06,
            p_d: 0.15,
        }
    }
}

impl RateParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let rates = [
            ("eta", self.eta),
            ("gamma", self.gamma),
            ("gamma_d", self.gamma_d),
            ("gamma_z", self.gamma_z),
            ("gamma_h", self.gamma_h),
        ];
        if !(self.population > 0.0) || !self.population.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "population must be > 0, got {}",
                self.population
            )));
        }
        for (name, r) in rates {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(ModelError::InvalidParams(format!("{name} must be >= 0, got {r}")));
            }
        }
        for (name, p) in [("rho", self.rho), ("p_h", self.p_h), ("p_d", self.p_d)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidParams(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// A time-varying transmission rate β(t), in per day.
pub trait TransmissionSignal {
    fn beta(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> TransmissionSignal for F {
    fn beta(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Concrete β(t) shapes used by scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BetaProfile {
    Constant(f64),
    /// Linear interpolation between `(t, β)` knots, flat outside.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// `base + Σ amp · exp(-((t - center) / width)²)`.
    Bumps { base: f64, bumps: Vec<(f64, f64, f64)> },
}

impl TransmissionSignal for BetaProfile {
    fn beta(&self, t: f64) -> f64 {
        match self {
            BetaProfile::Constant(b) => *b,
            BetaProfile::PiecewiseLinear(knots) => {
                let Some(first) = knots.first() else { return 0.0 };
                if t <= first.0 {
                    return first.1;
                }
                for w in knots.windows(2) {
                    let ((t0, b0), (t1, b1)) = (w[0], w[1]);
                    if t <= t1 {
                        let f = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
                        return b0 + f * (b1 - b0);
                    }
                }
                knots.last().map(|k| k.1).unwrap_or(0.0)
            }
            BetaProfile::Bumps { base, bumps } => {
                base + bumps
                    .iter()
                    .map(|&(amp, c, w)| amp * (-((t - c) / w).powi(2)).exp())
                    .sum::<f64>()
            }
        }
    }
}

/// Time derivatives of all compartments.
pub fn rhs(state: &CompartmentState, beta: f64, p: &RateParams) -> Result<[f64; N_COMPARTMENTS], ModelError> {
    if !state.is_finite() || !beta.is_finite() {
        return Err(ModelError::NonFiniteInput);
    }
    Ok(rhs_unchecked(&state.0, beta, p))
}

/// [`rhs`] without input validation, for inner loops. Negative states pass
/// through unchanged.
#[inline]
pub fn rhs_unchecked(s: &[f64; N_COMPARTMENTS], beta: f64, p: &RateParams) -> [f64; N_COMPARTMENTS] {
    let inc = beta * s[X] * s[Y] / p.population;
    let removal = p.gamma * s[Y];
    let admit = p.p_h * removal;
    [
        -inc,
        inc - p.eta * s[L],
        p.eta * s[L] - removal,
        p.rho * removal - p.gamma_z * s[Z],
        p.gamma_z * s[Z],
        admit - p.gamma_h * s[H],
        admit,
        p.p_d * p.gamma_h * s[H] - p.gamma_d * s[D],
        p.gamma_d * s[D],
    ]
}

/// Cotangents of `⟨cot, rhs(state, β, ph, pd)⟩` with respect to the inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsVjp {
    pub state: [f64; N_COMPARTMENTS],
    pub beta: f64,
    pub p_h: f64,
    pub p_d: f64,
}

/// Vector-Jacobian product of [`rhs_unchecked`].
pub fn rhs_vjp(s: &[f64; N_COMPARTMENTS], beta: f64, p: &RateParams, c: &[f64; N_COMPARTMENTS]) -> RhsVjp {
    let n = p.population;
    let c_inc = c[L] - c[X];
    let mut g = [0.0; N_COMPARTMENTS];
    g[X] = c_inc * beta * s[Y] / n;
    g[L] = p.eta * (c[Y] - c[L]);
    g[Y] = c_inc * beta * s[X] / n
        + p.gamma * (-c[Y] + p.rho * c[Z] + p.p_h * (c[H] + c[A]));
    g[Z] = p.gamma_z * (c[ZR] - c[Z]);
    g[H] = p.gamma_h * (p.p_d * c[D] - c[H]);
    g[D] = p.gamma_d * (c[DR] - c[D]);
    RhsVjp {
        state: g,
        beta: c_inc * s[X] * s[Y] / n,
        p_h: p.gamma * s[Y] * (c[H] + c[A]),
        p_d: p.gamma_h * s[H] * c[D],
    }
}

/// `f = dstate - rhs(state)`; zero exactly when the state derivative obeys
/// the model.
pub fn residual(
    state: &CompartmentState,
    dstate: &[f64; N_COMPARTMENTS],
    beta: f64,
    p: &RateParams,
) -> Result<[f64; N_COMPARTMENTS], ModelError> {
    if dstate.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }
    let r = rhs(state, beta, p)?;
    let mut f = [0.0; N_COMPARTMENTS];
    for i in 0..N_COMPARTMENTS {
        f[i] = dstate[i] - r[i];
    }
    Ok(f)
}

/// Sampled solution of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CompartmentState>,
}

impl Trajectory {
    pub fn last(&self) -> (f64, CompartmentState) {
        (
            *self.times.last().expect("trajectory is never empty"),
            *self.states.last().expect("trajectory is never empty"),
        )
    }
}

/// Classical fourth-order Runge–Kutta from `t0` to `t1`.
///
/// Steps land on `t0 + k·dt`; the last step is shortened to end exactly at
/// `t1`. Both endpoints are included.
pub fn integrate_rk4<B: TransmissionSignal + ?Sized>(
    initial: &CompartmentState,
    beta_fn: &B,
    params: &RateParams,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Trajectory, ModelError> {
    if !(t1 > t0) || !(dt > 0.0) || dt > t1 - t0 || !t0.is_finite() || !t1.is_finite() {
        return Err(ModelError::InvalidSpan { t0, t1, dt });
    }
    params.validate()?;
    if !initial.is_finite() {
        return Err(ModelError::NonFiniteInput);
    }
    let span = t1 - t0;
    let mut full = (span / dt).floor() as usize;
    // A remainder below round-off is folded into the last full step.
    let rem = span - full as f64 * dt;
    let partial = rem > 1e-9 * dt;
    if !partial && full == 0 {
        full = 1;
    }
    let steps = full + usize::from(partial);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = initial.0;
    let mut t = t0;
    times.push(t);
    states.push(*initial);
    for k in 0..steps {
        let t_next = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * dt };
        let h = t_next - t;
        let f = |tt: f64, ss: &[f64; N_COMPARTMENTS]| rhs_unchecked(ss, beta_fn.beta(tt), params);
        let k1 = f(t, &s);
        let k2 = f(t + 0.5 * h, &axpy(&s, 0.5 * h, &k1));
        let k3 = f(t + 0.5 * h, &axpy(&s, 0.5 * h, &k2));
        let k4 = f(t + h, &axpy(&s, h, &k3));
        for i in 0..N_COMPARTMENTS {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteState { t: t_next });
        }
        t = t_next;
        times.push(t);
        states.push(CompartmentState(s));
    }
    Ok(Trajectory { times, states })
}

#[inline]
fn axpy(s: &[f64; N_COMPARTMENTS], a: f64, k: &[f64; N_COMPARTMENTS]) -> [f64; N_COMPARTMENTS] {
    let mut out = *s;
    for i in 0..N_COMPARTMENTS {
        out[i] += a * k[i];
    }
    out
}
