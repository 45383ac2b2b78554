use crate::compartment::{rhs_unchecked, rhs_vjp, RateParams, N_COMPARTMENTS};
use crate::data::{Channel, Dataset, ScalingSpec};
use crate::neural::{Mlp, NeuralError};

use super::{sigmoid, softplus, LossWeights, PinnConfig, PinnError, StateScaling, TrainingWindow, COUNTERS};

/// Loss value broken into its terms. `total = data + w_ode·(initial + residual)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub data: f64,
    pub initial: f64,
    pub residual: f64,
    pub total: f64,
}

/// Training loss of one window as a function of the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Objective {
    state: Mlp,
    factor: Mlp,
    weights: LossWeights,
    rates: RateParams,
    scaling: ScalingSpec,
    state_scaling: StateScaling,
    span: f64,
    /// Observed normalized values of weeks `first..=last`.
    targets: Vec<[Option<f64>; 5]>,
    counts: [usize; 5],
    /// τ at the end of weeks `first-1..=last`.
    tau_ends: Vec<f64>,
    /// τ at collocation points.
    tau_colloc: Vec<f64>,
}

impl Objective {
    pub fn new(dataset: &Dataset, window: &TrainingWindow, config: &PinnConfig) -> Result<Self, PinnError> {
        config.validate()?;
        if window.last_week > dataset.weeks() {
            return Err(PinnError::InvalidWindow(format!(
                "window ends at week {} but data ends at week {}",
                window.last_week,
                dataset.weeks()
            )));
        }
        let targets: Vec<[Option<f64>; 5]> = (window.first_week..=window.last_week)
            .map(|w| std::array::from_fn(|c| dataset.value(Channel::ALL[c], w)))
            .collect();
        let counts: [usize; 5] = std::array::from_fn(|c| targets.iter().filter(|t| t[c].is_some()).count());
        if counts.iter().all(|&n| n == 0) {
            return Err(PinnError::EmptyWindow);
        }
        let weeks = window.weeks() as usize;
        let tau_ends = (0..=weeks).map(|j| j as f64 / weeks as f64).collect();
        let tau_colloc = window
            .collocation_days(config.collocation_per_week)
            .into_iter()
            .map(|d| window.tau(d))
            .collect();
        Ok(Self {
            state: Mlp::new(config.state_net),
            factor: Mlp::new(config.factor_net),
            weights: config.weights,
            rates: config.rates,
            scaling: dataset.scaling,
            state_scaling: StateScaling::new(&dataset.scaling, &config.rates, window.weeks()),
            span: window.span_days(),
            targets,
            counts,
            tau_ends,
            tau_colloc,
        })
    }

    pub fn param_count(&self) -> usize {
        self.state.param_count() + self.factor.param_count() + 2
    }

    pub fn collocation_points(&self) -> usize {
        self.tau_colloc.len()
    }

    /// Loss terms and, when `grad` is given, the exact gradient of `total`
    /// written into it.
    pub fn evaluate(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> Result<LossParts, PinnError> {
        let np = self.param_count();
        if params.len() != np {
            return Err(NeuralError::DimensionMismatch {
                expected: np,
                found: params.len(),
            }
            .into());
        }
        if let Some(g) = grad.as_deref_mut() {
            if g.len() != np {
                return Err(NeuralError::DimensionMismatch {
                    expected: np,
                    found: g.len(),
                }
                .into());
            }
            g.fill(0.0);
        }
        let ns = self.state.param_count();
        let nf = self.factor.param_count();
        let (ps, rest) = params.split_at(ns);
        let (pf, praw) = rest.split_at(nf);
        let w_ode = self.weights.w_ode;
        let with_ode = w_ode != 0.0;
        let weeks = self.targets.len();
        let m = if with_ode { self.tau_colloc.len() } else { 0 };
        if with_ode && m == 0 {
            return Err(PinnError::EmptyCollocation);
        }

        let ends = self.state.forward_batch(ps, &self.tau_ends, false)?;
        let mut tau_f = Vec::with_capacity(weeks + m);
        tau_f.extend_from_slice(&self.tau_ends[1..]);
        tau_f.extend_from_slice(&self.tau_colloc[..m]);
        let fac = self.factor.forward_batch(pf, &tau_f, false)?;

        // Observables per training week and their cotangents.
        let gain: [f64; 3] = std::array::from_fn(|i| {
            let (ch, ci) = COUNTERS[i];
            self.state_scaling.scale[ci] / self.scaling.scale[ch.index()]
        });
        let shift: [f64; 3] = std::array::from_fn(|i| {
            let ch = COUNTERS[i].0;
            self.scaling.offset[ch.index()] / self.scaling.scale[ch.index()]
        });
        let obs = |j: usize| -> [f64; 5] {
            let mut o = [0.0; 5];
            for (i, (ch, ci)) in COUNTERS.iter().enumerate() {
                o[ch.index()] = gain[i] * (ends.value(*ci, j + 1) - ends.value(*ci, j)) - shift[i];
            }
            o[Channel::Mobility.index()] = fac.value(0, j);
            o[Channel::Vaccines.index()] = fac.value(1, j);
            o
        };
        let mut obs_bar = vec![[0.0; 5]; weeks];

        let mut data = 0.0;
        let mut initial = 0.0;
        for (j, target) in self.targets.iter().enumerate() {
            let o = obs(j);
            for c in 0..5 {
                let Some(y) = target[c] else { continue };
                let n = self.counts[c] as f64;
                let e = o[c] - y;
                data += self.weights.channel[c] * e * e / n;
                obs_bar[j][c] += 2.0 * self.weights.channel[c] * e / n;
            }
        }
        if with_ode {
            let first = &self.targets[0];
            let avail = first.iter().filter(|v| v.is_some()).count();
            if avail > 0 {
                let o = obs(0);
                for c in 0..5 {
                    let Some(y) = first[c] else { continue };
                    let e = o[c] - y;
                    initial += e * e / avail as f64;
                    obs_bar[0][c] += w_ode * 2.0 * e / avail as f64;
                }
            }
        }

        let p_h = sigmoid(praw[0]);
        let p_d = sigmoid(praw[1]);
        let rates = RateParams { p_h, p_d, ..self.rates };
        let mut residual = 0.0;
        let mut colloc_trace = None;
        let mut u_bar_c = Vec::new();
        let mut t_bar_c = Vec::new();
        let mut beta_bar = vec![0.0; m];
        let (mut ph_bar, mut pd_bar) = (0.0, 0.0);
        if with_ode {
            let tr = self.state.forward_batch(ps, &self.tau_colloc, true)?;
            let want_grad = grad.is_some();
            if want_grad {
                u_bar_c = vec![0.0; N_COMPARTMENTS * m];
                t_bar_c = vec![0.0; N_COMPARTMENTS * m];
            }
            let norm = 1.0 / (N_COMPARTMENTS as f64 * m as f64);
            let sc = &self.state_scaling.scale;
            let wq = &self.weights.equation;
            for p in 0..m {
                let u: [f64; N_COMPARTMENTS] = std::array::from_fn(|i| tr.value(i, p));
                let s = self.state_scaling.to_persons(&u);
                let raw = fac.value(2, weeks + p);
                let beta = softplus(raw);
                let f = rhs_unchecked(&s, beta, &rates);
                let mut cot = [0.0; N_COMPARTMENTS];
                for i in 0..N_COMPARTMENTS {
                    let r = wq[i] * (tr.tangent(i, p) / self.span - f[i] / sc[i]);
                    residual += norm * r * r;
                    let rb = w_ode * 2.0 * norm * r;
                    if want_grad {
                        t_bar_c[i * m + p] = rb * wq[i] / self.span;
                    }
                    cot[i] = -rb * wq[i] / sc[i];
                }
                if want_grad {
                    let v = rhs_vjp(&s, beta, &rates, &cot);
                    for i in 0..N_COMPARTMENTS {
                        u_bar_c[i * m + p] = v.state[i] * sc[i];
                    }
                    beta_bar[p] = v.beta * sigmoid(raw);
                    ph_bar += v.p_h;
                    pd_bar += v.p_d;
                }
            }
            colloc_trace = Some(tr);
        }

        let total = if with_ode { data + w_ode * (initial + residual) } else { data };
        let parts = LossParts {
            data,
            initial,
            residual,
            total,
        };
        let Some(g) = grad else { return Ok(parts) };

        // State net at week ends.
        let n_end = weeks + 1;
        let mut u_bar_e = vec![0.0; N_COMPARTMENTS * n_end];
        for (j, ob) in obs_bar.iter().enumerate() {
            for (i, (ch, ci)) in COUNTERS.iter().enumerate() {
                let b = gain[i] * ob[ch.index()];
                u_bar_e[ci * n_end + j + 1] += b;
                u_bar_e[ci * n_end + j] -= b;
            }
        }
        let (gs, rest) = g.split_at_mut(ns);
        let (gf, gp) = rest.split_at_mut(nf);
        self.state.backward_batch(ps, &ends, &u_bar_e, None, gs)?;
        if let Some(tr) = &colloc_trace {
            self.state.backward_batch(ps, tr, &u_bar_c, Some(&t_bar_c), gs)?;
        }

        let nfac = weeks + m;
        let mut f_bar = vec![0.0; 3 * nfac];
        for (j, ob) in obs_bar.iter().enumerate() {
            f_bar[j] = ob[Channel::Mobility.index()];
            f_bar[nfac + j] = ob[Channel::Vaccines.index()];
        }
        f_bar[2 * nfac + weeks..].copy_from_slice(&beta_bar);
        self.factor.backward_batch(pf, &fac, &f_bar, None, gf)?;

        gp[0] = ph_bar * p_h * (1.0 - p_h);
        gp[1] = pd_bar * p_d * (1.0 - p_d);
        Ok(parts)
    }
}
