//! Small fully connected networks with exact derivatives.
//!
//! A network maps a scalar (or short vector) input to an output vector through
//! `tanh` hidden layers and a final affine layer. Evaluation is batched over
//! many input points at once. Alongside the values, the forward pass can carry
//! a tangent, the derivative of every activation with respect to the first
//! input, which is what an ODE residual needs. The backward pass propagates
//! cotangents through both the value path and the tangent path, so parameter
//! gradients of losses built from `d output / d t` are exact.
//!
//! Parameter layout is layer-major: for each layer the weight matrix
//! (`fan_out × fan_in`, row-major) followed by its bias vector.

mod adam;
mod checkpoint;

pub use adam::{adam_step, l2_penalty, AdamState, TrainConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter vector contains non-finite values")]
    NonFiniteParams,
    #[error("optimizer state shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Shape of a multilayer perceptron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
}

impl MlpConfig {
    pub fn new(
        input_dim: usize,
        hidden_layers: usize,
        hidden_width: usize,
        output_dim: usize,
    ) -> Result<Self, NeuralError> {
        if input_dim == 0 || output_dim == 0 || (hidden_layers > 0 && hidden_width == 0) {
            return Err(NeuralError::InvalidConfig(format!(
                "dims must be >= 1 (input {input_dim}, width {hidden_width}, output {output_dim})"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_layers,
            hidden_width,
            output_dim,
        })
    }

    /// Time -> nine compartments, three hidden layers of fifty.
    pub fn state_net() -> Self {
        Self {
            input_dim: 1,
            hidden_layers: 3,
            hidden_width: 50,
            output_dim: 9,
        }
    }

    /// Time -> (mobility, vaccines, raw transmission rate).
    pub fn factor_net() -> Self {
        Self {
            input_dim: 1,
            hidden_layers: 3,
            hidden_width: 50,
            output_dim: 3,
        }
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_layers + 2);
        w.push(self.input_dim);
        w.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        w.push(self.output_dim);
        w
    }

    /// Σ (fan_in + 1)·fan_out over layers.
    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| (p[0] + 1) * p[1]).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: usize,
    hidden: bool,
}

/// A network shape with precomputed parameter offsets.
#[derive(Debug, Clone)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<LayerShape>,
    n_params: usize,
}

/// Activations recorded by a batched forward pass.
///
/// Each layer buffer is row-major `width × cols`; with a tangent the first `n`
/// columns hold values and the next `n` hold derivatives w.r.t. the input.
#[derive(Debug, Clone)]
pub struct Trace {
    n: usize,
    tangent: bool,
    acts: Vec<Vec<f64>>,
    zdots: Vec<Vec<f64>>,
}

impl Trace {
    pub fn points(&self) -> usize {
        self.n
    }

    pub fn has_tangent(&self) -> bool {
        self.tangent
    }

    fn cols(&self) -> usize {
        if self.tangent {
            2 * self.n
        } else {
            self.n
        }
    }

    /// Output `k` at point `p`.
    pub fn value(&self, k: usize, p: usize) -> f64 {
        let out = self.acts.last().expect("trace has an output layer");
        out[k * self.cols() + p]
    }

    /// d output_k / d input at point `p`. Panics without a tangent.
    pub fn tangent(&self, k: usize, p: usize) -> f64 {
        assert!(self.tangent, "trace was recorded without a tangent");
        let out = self.acts.last().expect("trace has an output layer");
        out[k * self.cols() + self.n + p]
    }
}

/// C = op(A)·op(B) + beta·C on row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the length checks above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Self {
        let widths = config.widths();
        let n_layers = widths.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        let mut off = 0;
        for (i, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            layers.push(LayerShape {
                fan_in,
                fan_out,
                w_off: off,
                b_off: off + fan_in * fan_out,
                hidden: i + 1 < n_layers,
            });
            off += (fan_in + 1) * fan_out;
        }
        Self {
            config,
            layers,
            n_params: off,
        }
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.n_params
    }

    fn check_params(&self, params: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.n_params {
            return Err(NeuralError::DimensionMismatch {
                expected: self.n_params,
                found: params.len(),
            });
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFiniteParams);
        }
        Ok(())
    }

    /// Batched forward pass over scalar inputs `ts` (the first input
    /// coordinate; any further inputs are held at zero).
    pub fn forward_batch(
        &self,
        params: &[f64],
        ts: &[f64],
        tangent: bool,
    ) -> Result<Trace, NeuralError> {
        self.check_params(params)?;
        let n = ts.len();
        let cols = if tangent { 2 * n } else { n };
        let d0 = self.config.input_dim;
        let mut a0 = vec![0.0; d0 * cols];
        a0[..n].copy_from_slice(ts);
        if tangent {
            a0[n..2 * n].iter_mut().for_each(|v| *v = 1.0);
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut zdots = Vec::with_capacity(self.layers.len());
        acts.push(a0);
        for layer in &self.layers {
            let prev = acts.last().expect("input layer present");
            let w = &params[layer.w_off..layer.b_off];
            let b = &params[layer.b_off..layer.b_off + layer.fan_out];
            let mut z = vec![0.0; layer.fan_out * cols];
            gemm(layer.fan_out, layer.fan_in, cols, w, false, prev, false, &mut z, 0.0);
            for (i, bi) in b.iter().enumerate() {
                z[i * cols..i * cols + n].iter_mut().for_each(|v| *v += bi);
            }
            if layer.hidden {
                let mut zdot = Vec::new();
                if tangent {
                    zdot = vec![0.0; layer.fan_out * n];
                }
                for i in 0..layer.fan_out {
                    let row = &mut z[i * cols..(i + 1) * cols];
                    for p in 0..n {
                        let a = row[p].tanh();
                        row[p] = a;
                        if tangent {
                            let zd = row[n + p];
                            zdot[i * n + p] = zd;
                            row[n + p] = (1.0 - a * a) * zd;
                        }
                    }
                }
                zdots.push(zdot);
            } else {
                zdots.push(Vec::new());
            }
            acts.push(z);
        }
        Ok(Trace {
            n,
            tangent,
            acts,
            zdots,
        })
    }

    /// Accumulates into `grad` the parameter gradient of
    /// `Σ_p ⟨out_bar_p, y_p⟩ + ⟨tan_bar_p, dy_p/dt⟩`.
    ///
    /// `out_bar` and `tan_bar` are row-major `output_dim × n`.
    pub fn backward_batch(
        &self,
        params: &[f64],
        trace: &Trace,
        out_bar: &[f64],
        tan_bar: Option<&[f64]>,
        grad: &mut [f64],
    ) -> Result<(), NeuralError> {
        let n = trace.n;
        let out_len = self.config.output_dim * n;
        if out_bar.len() != out_len {
            return Err(NeuralError::DimensionMismatch {
                expected: out_len,
                found: out_bar.len(),
            });
        }
        if grad.len() != self.n_params || params.len() != self.n_params {
            return Err(NeuralError::DimensionMismatch {
                expected: self.n_params,
                found: grad.len().min(params.len()),
            });
        }
        if let Some(tb) = tan_bar {
            if !trace.tangent {
                return Err(NeuralError::InvalidConfig(
                    "tangent cotangent supplied for a trace without tangent".into(),
                ));
            }
            if tb.len() != out_len {
                return Err(NeuralError::DimensionMismatch {
                    expected: out_len,
                    found: tb.len(),
                });
            }
        }
        let cols = trace.cols();
        let k_out = self.config.output_dim;
        let mut zbar = vec![0.0; k_out * cols];
        for k in 0..k_out {
            zbar[k * cols..k * cols + n].copy_from_slice(&out_bar[k * n..(k + 1) * n]);
            if let Some(tb) = tan_bar {
                zbar[k * cols + n..(k + 1) * cols].copy_from_slice(&tb[k * n..(k + 1) * n]);
            }
        }
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let a_out = &trace.acts[li + 1];
            if layer.hidden {
                // zbar currently holds the cotangent of this layer's activations.
                let zdot = &trace.zdots[li];
                for i in 0..layer.fan_out {
                    let row = &mut zbar[i * cols..(i + 1) * cols];
                    let arow = &a_out[i * cols..i * cols + n];
                    for p in 0..n {
                        let a = arow[p];
                        let s = 1.0 - a * a;
                        if trace.tangent {
                            let at = row[n + p];
                            let zd = zdot[i * n + p];
                            row[p] = row[p] * s - 2.0 * at * zd * a * s;
                            row[n + p] = at * s;
                        } else {
                            row[p] *= s;
                        }
                    }
                }
            }
            let a_in = &trace.acts[li];
            let (gw, gb) = grad[layer.w_off..layer.b_off + layer.fan_out].split_at_mut(layer.b_off - layer.w_off);
            gemm(layer.fan_out, cols, layer.fan_in, &zbar, false, a_in, true, gw, 1.0);
            for (i, g) in gb.iter_mut().enumerate() {
                *g += zbar[i * cols..i * cols + n].iter().sum::<f64>();
            }
            if li > 0 {
                let w = &params[layer.w_off..layer.b_off];
                let mut abar = vec![0.0; layer.fan_in * cols];
                gemm(layer.fan_in, layer.fan_out, cols, w, true, &zbar, false, &mut abar, 0.0);
                zbar = abar;
            }
        }
        Ok(())
    }
}

/// Output of the network at a single input `t`.
pub fn forward(config: &MlpConfig, params: &[f64], t: f64) -> Result<Vec<f64>, NeuralError> {
    let trace = Mlp::new(*config).forward_batch(params, &[t], false)?;
    Ok((0..config.output_dim).map(|k| trace.value(k, 0)).collect())
}

/// Output and its derivative with respect to `t`.
pub fn forward_with_time_grad(
    config: &MlpConfig,
    params: &[f64],
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
    let trace = Mlp::new(*config).forward_batch(params, &[t], true)?;
    let k = config.output_dim;
    Ok((
        (0..k).map(|i| trace.value(i, 0)).collect(),
        (0..k).map(|i| trace.tangent(i, 0)).collect(),
    ))
}

/// Gradient of `⟨upstream, forward(t)⟩` with respect to every parameter.
pub fn grad_params(
    config: &MlpConfig,
    params: &[f64],
    t: f64,
    upstream: &[f64],
) -> Result<Vec<f64>, NeuralError> {
    if upstream.len() != config.output_dim {
        return Err(NeuralError::DimensionMismatch {
            expected: config.output_dim,
            found: upstream.len(),
        });
    }
    let mlp = Mlp::new(*config);
    let trace = mlp.forward_batch(params, &[t], false)?;
    let mut grad = vec![0.0; mlp.param_count()];
    mlp.backward_batch(params, &trace, upstream, None, &mut grad)?;
    Ok(grad)
}

/// Glorot-style bound for a layer.
pub fn init_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Seeded initialization: every weight and bias of a layer is drawn uniformly
/// from `±sqrt(6 / (fan_in + fan_out))` using ChaCha8.
pub fn init_params(config: &MlpConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_params_with(config, &mut rng)
}

pub(crate) fn init_params_with(config: &MlpConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mlp = Mlp::new(*config);
    let mut params = vec![0.0; mlp.param_count()];
    for layer in &mlp.layers {
        let bound = init_bound(layer.fan_in, layer.fan_out);
        let end = layer.b_off + layer.fan_out;
        for p in &mut params[layer.w_off..end] {
            *p = rng.random_range(-bound..bound);
        }
    }
    params
}
