//! Physics-informed forecaster.
//!
//! A state network maps scaled time to the nine compartments and a factor
//! network maps it to (mobility, vaccines, raw transmission rate). Both see
//! `τ = (t - t_start) / span` with `t` in days, so the training window is
//! `τ ∈ [0, 1]` and forecasts extrapolate past 1.
//!
//! Week `k` ends on day `7k`. Reported weekly counts are differences of the
//! cumulative counters `Zr`, `A`, `Dr` across that week.

mod objective;
mod train;

pub use objective::{LossParts, Objective};
pub use train::{initial_params, predict_point, train, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compartment::{self as cm, CompartmentState, ModelError, RateParams, N_COMPARTMENTS};
use crate::data::{Channel, Dataset, ScalingSpec};
use crate::neural::{Checkpoint, Mlp, MlpConfig, NeuralError};

#[derive(Debug, Error)]
pub enum PinnError {
    #[error("training window has no observed weeks")]
    EmptyWindow,
    #[error("no collocation points")]
    EmptyCollocation,
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("loss diverged at epoch {epoch} (value {loss})")]
    DivergedLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Weights on the loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight on the initial-condition plus residual terms.
    pub w_ode: f64,
    /// Per-equation residual weights, compartment order.
    pub equation: [f64; N_COMPARTMENTS],
    /// Per-channel data weights, dataset column order.
    pub channel: [f64; 5],
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_ode: 0.1,
            equation: [1.0; N_COMPARTMENTS],
            channel: [1.0; 5],
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), PinnError> {
        let all = std::iter::once(self.w_ode).chain(self.equation).chain(self.channel);
        if all.clone().any(|w| !(w >= 0.0) || !w.is_finite()) {
            return Err(PinnError::InvalidWindow("loss weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Inclusive range of training weeks plus the horizons to forecast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingWindow {
    pub first_week: u32,
    pub last_week: u32,
    pub horizons: Vec<u32>,
}

impl TrainingWindow {
    pub fn new(first_week: u32, last_week: u32) -> Result<Self, PinnError> {
        Self::with_horizons(first_week, last_week, vec![1, 2, 3, 4])
    }

    pub fn with_horizons(first_week: u32, last_week: u32, horizons: Vec<u32>) -> Result<Self, PinnError> {
        if first_week < 1 {
            return Err(PinnError::InvalidWindow("weeks start at 1".into()));
        }
        if last_week < first_week + 3 {
            return Err(PinnError::InvalidWindow(format!(
                "weeks {first_week}..={last_week}: need at least 4 weeks"
            )));
        }
        if horizons.is_empty() || horizons.iter().any(|h| !(1..=4).contains(h)) {
            return Err(PinnError::InvalidWindow(format!("horizons {horizons:?} must lie in 1..=4")));
        }
        Ok(Self {
            first_week,
            last_week,
            horizons,
        })
    }

    pub fn weeks(&self) -> u32 {
        self.last_week - self.first_week + 1
    }

    /// First day of the window.
    pub fn start_day(&self) -> f64 {
        7.0 * (self.first_week - 1) as f64
    }

    pub fn span_days(&self) -> f64 {
        7.0 * self.weeks() as f64
    }

    pub fn tau(&self, day: f64) -> f64 {
        (day - self.start_day()) / self.span_days()
    }

    /// `per_week` points per training week, evenly spaced over the whole
    /// window including both ends, in days.
    pub fn collocation_days(&self, per_week: usize) -> Vec<f64> {
        let m = per_week * self.weeks() as usize;
        match m {
            0 => Vec::new(),
            1 => vec![self.start_day()],
            _ => (0..m)
                .map(|i| self.start_day() + self.span_days() * i as f64 / (m - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnConfig {
    pub state_net: MlpConfig,
    pub factor_net: MlpConfig,
    pub rates: RateParams,
    pub weights: LossWeights,
    pub collocation_per_week: usize,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self {
            state_net: MlpConfig::state_net(),
            factor_net: MlpConfig::factor_net(),
            rates: RateParams::default(),
            weights: LossWeights::default(),
            collocation_per_week: 5,
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<(), PinnError> {
        let bad = |m: &str| Err(PinnError::InvalidWindow(m.into()));
        if self.state_net.input_dim != 1 || self.state_net.output_dim != N_COMPARTMENTS {
            return bad("state network must map 1 input to 9 outputs");
        }
        if self.factor_net.input_dim != 1 || self.factor_net.output_dim != 3 {
            return bad("factor network must map 1 input to 3 outputs");
        }
        self.rates.validate()?;
        self.weights.validate()?;
        if self.collocation_per_week == 0 && self.weights.w_ode > 0.0 {
            return Err(PinnError::EmptyCollocation);
        }
        Ok(())
    }

    /// Total length of the flat parameter vector.
    pub fn param_count(&self) -> usize {
        self.state_net.param_count() + self.factor_net.param_count() + 2
    }
}

/// Per-compartment affine map `S = offset + scale · u` from network output
/// `u` to persons.
///
/// Scales come from the largest weekly value of the linked observed channel:
/// a compartment drained at rate `r` that carries weekly flow `m` holds about
/// `m / (7 r)` persons, and a cumulative counter gains at most `m` per week,
/// so `m · W` bounds it over a `W`-week window. Susceptibles are centred on
/// the population and scaled by the largest plausible depletion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateScaling {
    pub offset: [f64; N_COMPARTMENTS],
    pub scale: [f64; N_COMPARTMENTS],
}

impl StateScaling {
    pub fn new(data: &ScalingSpec, rates: &RateParams, weeks: u32) -> Self {
        use cm::*;
        let pos = |v: f64| if v > 0.0 && v.is_finite() { v } else { 1.0 };
        let mc = pos(data.max_value(Channel::Cases));
        let mh = pos(data.max_value(Channel::Hosp));
        let md = pos(data.max_value(Channel::Deaths));
        let w = weeks as f64;
        let mut offset = [0.0; N_COMPARTMENTS];
        let mut scale = [1.0; N_COMPARTMENTS];
        offset[X] = rates.population;
        scale[X] = pos(mc * w / rates.rho);
        scale[L] = pos(mc / (7.0 * rates.rho * rates.eta));
        scale[Y] = pos(mc / (7.0 * rates.rho * rates.gamma));
        scale[Z] = pos(mc / (7.0 * rates.gamma_z));
        scale[ZR] = mc * w;
        scale[H] = pos(mh / (7.0 * rates.gamma_h));
        scale[A] = mh * w;
        scale[D] = pos(md / (7.0 * rates.gamma_d));
        scale[DR] = md * w;
        Self { offset, scale }
    }

    pub fn to_persons(&self, u: &[f64; N_COMPARTMENTS]) -> [f64; N_COMPARTMENTS] {
        std::array::from_fn(|i| self.offset[i] + self.scale[i] * u[i])
    }
}

/// The cumulative counter behind each reported count channel.
pub(crate) const COUNTERS: [(Channel, usize); 3] = [
    (Channel::Cases, cm::ZR),
    (Channel::Deaths, cm::DR),
    (Channel::Hosp, cm::A),
];

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A trained (or freshly initialised) model for one window.
#[derive(Debug, Clone)]
pub struct PinnModel {
    pub config: PinnConfig,
    pub window: TrainingWindow,
    pub data_scaling: ScalingSpec,
    pub state_scaling: StateScaling,
    /// `[state net | factor net | p_h raw | p_d raw]`.
    pub params: Vec<f64>,
    pub seed: u64,
}

impl PinnModel {
    pub fn new(
        config: PinnConfig,
        window: TrainingWindow,
        data_scaling: ScalingSpec,
        params: Vec<f64>,
        seed: u64,
    ) -> Result<Self, PinnError> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(NeuralError::DimensionMismatch {
                expected: config.param_count(),
                found: params.len(),
            }
            .into());
        }
        let state_scaling = StateScaling::new(&data_scaling, &config.rates, window.weeks());
        Ok(Self {
            config,
            window,
            data_scaling,
            state_scaling,
            params,
            seed,
        })
    }

    fn split(&self) -> (&[f64], &[f64], f64, f64) {
        let ns = self.config.state_net.param_count();
        let nf = self.config.factor_net.param_count();
        let (s, rest) = self.params.split_at(ns);
        let (f, p) = rest.split_at(nf);
        (s, f, p[0], p[1])
    }

    pub fn p_h(&self) -> f64 {
        sigmoid(self.split().2)
    }

    pub fn p_d(&self) -> f64 {
        sigmoid(self.split().3)
    }

    /// Rates with the estimated probabilities filled in.
    pub fn rates(&self) -> RateParams {
        RateParams {
            p_h: self.p_h(),
            p_d: self.p_d(),
            ..self.config.rates
        }
    }

    /// Raw network outputs of the state net at the given days.
    fn state_outputs(&self, days: &[f64]) -> Result<Vec<[f64; N_COMPARTMENTS]>, PinnError> {
        let taus: Vec<f64> = days.iter().map(|&d| self.window.tau(d)).collect();
        let tr = Mlp::new(self.config.state_net).forward_batch(self.split().0, &taus, false)?;
        Ok((0..days.len())
            .map(|p| std::array::from_fn(|k| tr.value(k, p)))
            .collect())
    }

    fn factor_outputs(&self, days: &[f64]) -> Result<Vec<[f64; 3]>, PinnError> {
        let taus: Vec<f64> = days.iter().map(|&d| self.window.tau(d)).collect();
        let tr = Mlp::new(self.config.factor_net).forward_batch(self.split().1, &taus, false)?;
        Ok((0..days.len())
            .map(|p| std::array::from_fn(|k| tr.value(k, p)))
            .collect())
    }

    /// Compartments in persons on day `t`.
    pub fn state_at(&self, t: f64) -> Result<CompartmentState, PinnError> {
        let u = self.state_outputs(&[t])?[0];
        Ok(CompartmentState(self.state_scaling.to_persons(&u)))
    }

    /// Transmission rate on day `t`.
    pub fn beta(&self, t: f64) -> Result<f64, PinnError> {
        Ok(softplus(self.factor_outputs(&[t])?[0][2]))
    }

    /// Normalized (cases, deaths, hosp, mobility, vaccines) for the week
    /// ending on day `t`.
    pub fn observables(&self, t: f64) -> Result<[f64; 5], PinnError> {
        Ok(self.observables_batch(&[t])?[0])
    }

    pub fn observables_batch(&self, days: &[f64]) -> Result<Vec<[f64; 5]>, PinnError> {
        let mut both = Vec::with_capacity(2 * days.len());
        both.extend(days.iter().map(|d| d - 7.0));
        both.extend_from_slice(days);
        let u = self.state_outputs(&both)?;
        let f = self.factor_outputs(days)?;
        let n = days.len();
        Ok((0..n)
            .map(|p| {
                let mut out = [0.0; 5];
                for (ch, ci) in COUNTERS {
                    let flow = self.state_scaling.scale[ci] * (u[n + p][ci] - u[p][ci]);
                    out[ch.index()] = self.data_scaling.normalize(ch, flow);
                }
                out[Channel::Mobility.index()] = f[p][0];
                out[Channel::Vaccines.index()] = f[p][1];
                out
            })
            .collect())
    }

    /// Observables for `week` in original units.
    pub fn observables_raw(&self, week: u32) -> Result<[f64; 5], PinnError> {
        let o = self.observables(7.0 * week as f64)?;
        Ok(std::array::from_fn(|i| self.data_scaling.denormalize(Channel::ALL[i], o[i])))
    }

    pub fn to_checkpoint(&self, step: u64) -> Checkpoint {
        Checkpoint {
            nets: vec![
                ("state".into(), self.config.state_net),
                ("factor".into(), self.config.factor_net),
            ],
            seed: self.seed,
            step,
            params: self.params.clone(),
        }
    }
}

/// Loss components of a model on its own window (no gradients).
pub fn loss_parts(model: &PinnModel, dataset: &Dataset) -> Result<LossParts, PinnError> {
    Objective::new(dataset, &model.window, &model.config)?.evaluate(&model.params, None)
}

pub fn data_loss(model: &PinnModel, dataset: &Dataset) -> Result<f64, PinnError> {
    Ok(loss_parts(model, dataset)?.data)
}

pub fn initial_loss(model: &PinnModel, dataset: &Dataset) -> Result<f64, PinnError> {
    Ok(loss_parts(model, dataset)?.initial)
}

pub fn residual_loss(model: &PinnModel, dataset: &Dataset) -> Result<f64, PinnError> {
    Ok(loss_parts(model, dataset)?.residual)
}

pub fn total_loss(model: &PinnModel, dataset: &Dataset) -> Result<f64, PinnError> {
    Ok(loss_parts(model, dataset)?.total)
}
