use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    LeakyRelu(f64),
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    z
                } else {
                    a * z
                }
            }
            Activation::Linear => z,
        }
    }

    /// Derivative; at the kink of the piecewise-linear units the left derivative is used.
    #[inline]
    fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::LeakyRelu(a) => {
                if z > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Linear => 1.0,
        }
    }

    #[inline]
    fn second_deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            _ => 0.0,
        }
    }

    fn is_piecewise_linear(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

/// Architecture of a fully connected network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, output_activation: Activation) -> Result<Self> {
        let spec = Self { layer_widths, activation, output_activation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {:?}", self.layer_widths)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of each layer's weight block in the flat vector.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.layer_widths
            .windows(2)
            .map(|w| {
                let o = off;
                off += w[0] * w[1] + w[1];
                o
            })
            .collect()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.activation
        }
    }

    fn check(&self, params: &[f64], input: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape(format!("{} params for a spec needing {}", params.len(), self.param_count())));
        }
        if input.len() != self.input_width() {
            return Err(Error::Shape(format!("input of width {} for a {}-wide network", input.len(), self.input_width())));
        }
        Ok(())
    }
}

/// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
/// The last layer's weights are additionally multiplied by `final_scale`.
pub fn init_params<R: Rng + ?Sized>(spec: &MlpSpec, final_scale: f64, rng: &mut R) -> ParamVector {
    let mut values = Vec::with_capacity(spec.param_count());
    let last = spec.n_layers() - 1;
    for (l, w) in spec.layer_widths.windows(2).enumerate() {
        let bound = 1.0 / (w[0] as f64).sqrt() * if l == last { final_scale } else { 1.0 };
        for _ in 0..w[0] * w[1] {
            values.push(rng.random_range(-1.0..=1.0) * bound);
        }
        values.extend(std::iter::repeat_n(0.0, w[1]));
    }
    ParamVector(values)
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Activations recorded by a forward pass: `post[0]` is the input, `pre[l]`
/// and `post[l + 1]` are layer `l`'s pre- and post-activation values.
#[derive(Debug, Clone)]
pub struct Trace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.post.last().unwrap()
    }
}

pub fn forward_trace(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<Trace> {
    spec.check(params, input)?;
    let n = spec.n_layers();
    let mut pre = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n + 1);
    post.push(input.to_vec());
    let mut off = 0;
    for l in 0..n {
        let (inw, outw) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let weights = &params[off..off + inw * outw];
        let mut z = params[off + inw * outw..off + inw * outw + outw].to_vec();
        off += inw * outw + outw;
        let h = &post[l];
        for i in 0..inw {
            axpy(h[i], &weights[i * outw..(i + 1) * outw], &mut z);
        }
        let act = spec.activation_of(l);
        post.push(z.iter().map(|&v| act.apply(v)).collect());
        pre.push(z);
    }
    Ok(Trace { pre, post })
}

pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    let mut trace = forward_trace(spec, params.as_slice(), input)?;
    Ok(trace.post.pop().unwrap())
}

fn backward_impl(
    spec: &MlpSpec,
    params: &[f64],
    trace: &Trace,
    out_grad: &[f64],
    mut grad: Option<&mut [f64]>,
) -> Result<Vec<f64>> {
    let n = spec.n_layers();
    if out_grad.len() != spec.output_width() {
        return Err(Error::Shape(format!("output gradient of width {} for a {}-wide output", out_grad.len(), spec.output_width())));
    }
    if let Some(g) = grad.as_deref() {
        if g.len() != spec.param_count() {
            return Err(Error::Shape("gradient buffer does not match parameter count".into()));
        }
    }
    let offsets = spec.layer_offsets();
    let out_act = spec.output_activation;
    let mut delta: Vec<f64> = out_grad.iter().zip(&trace.pre[n - 1]).map(|(s, &z)| s * out_act.deriv(z)).collect();
    for l in (0..n).rev() {
        let (inw, outw) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let off = offsets[l];
        let weights = &params[off..off + inw * outw];
        let h_prev = &trace.post[l];
        if let Some(g) = grad.as_deref_mut() {
            let (gw, gb) = g[off..off + inw * outw + outw].split_at_mut(inw * outw);
            for i in 0..inw {
                axpy(h_prev[i], &delta, &mut gw[i * outw..(i + 1) * outw]);
            }
            axpy(1.0, &delta, gb);
        }
        let g_prev: Vec<f64> = (0..inw).map(|i| dot(&weights[i * outw..(i + 1) * outw], &delta)).collect();
        if l == 0 {
            return Ok(g_prev);
        }
        let act = spec.activation;
        delta = g_prev.iter().zip(&trace.pre[l - 1]).map(|(g, &z)| g * act.deriv(z)).collect();
    }
    unreachable!("network has at least one layer")
}

/// Backpropagates `out_grad` (dLoss/dOutput) through a recorded pass, adding
/// the parameter gradient into `grad`. Returns dLoss/dInput.
pub fn backward_into(spec: &MlpSpec, params: &[f64], trace: &Trace, out_grad: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
    backward_impl(spec, params, trace, out_grad, Some(grad))
}

/// Backpropagates `out_grad` to the input only, skipping parameter gradients.
pub fn backward_input(spec: &MlpSpec, params: &[f64], trace: &Trace, out_grad: &[f64]) -> Result<Vec<f64>> {
    backward_impl(spec, params, trace, out_grad, None)
}

/// Gradient of a scalar loss of the network output with respect to every parameter.
/// `loss` returns the loss value and its derivative with respect to the output.
pub fn grad_params<F>(spec: &MlpSpec, params: &ParamVector, input: &[f64], loss: F) -> Result<(f64, ParamVector)>
where
    F: FnOnce(&[f64]) -> (f64, Vec<f64>),
{
    let trace = forward_trace(spec, params.as_slice(), input)?;
    let (value, dl_dout) = loss(trace.output());
    let mut grad = ParamVector::zeros(spec.param_count());
    backward_into(spec, params.as_slice(), &trace, &dl_dout, grad.as_mut_slice())?;
    Ok((value, grad))
}

fn require_scalar(spec: &MlpSpec) -> Result<()> {
    if spec.output_width() != 1 {
        return Err(Error::Shape(format!("expected a scalar-output network, width is {}", spec.output_width())));
    }
    Ok(())
}

/// Gradient of a scalar-output network with respect to its input.
pub fn grad_input(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    require_scalar(spec)?;
    let trace = forward_trace(spec, params.as_slice(), input)?;
    backward_impl(spec, params.as_slice(), &trace, &[1.0], None)
}

/// Gradient penalty `coeff * (|grad_x D(x)| - 1)^2` at `x`; its parameter
/// gradient is added into `grad` and the penalty value returned.
///
/// The input gradient is an explicit function of the weights and the
/// pre-activations, so the parameter gradient is obtained by reverse-mode
/// differentiation of that backward pass followed by the forward pass. When
/// the input gradient vanishes the norm's subgradient 0 is used.
pub fn gp_penalty_into(spec: &MlpSpec, params: &[f64], x: &[f64], coeff: f64, grad: &mut [f64]) -> Result<f64> {
    require_scalar(spec)?;
    if grad.len() != spec.param_count() {
        return Err(Error::Shape("gradient buffer does not match parameter count".into()));
    }
    let n = spec.n_layers();
    let offsets = spec.layer_offsets();
    let trace = forward_trace(spec, params, x)?;
    let w = &spec.layer_widths;

    // Input-gradient pass, keeping every delta (layer-l pre-activation adjoint)
    // and every g (adjoint of post[l]).
    let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut gs: Vec<Vec<f64>> = vec![Vec::new(); n];
    deltas[n - 1] = trace.pre[n - 1].iter().map(|&z| spec.output_activation.deriv(z)).collect();
    for l in (0..n).rev() {
        let (inw, outw) = (w[l], w[l + 1]);
        let weights = &params[offsets[l]..offsets[l] + inw * outw];
        gs[l] = (0..inw).map(|i| dot(&weights[i * outw..(i + 1) * outw], &deltas[l])).collect();
        if l > 0 {
            deltas[l - 1] =
                gs[l].iter().zip(&trace.pre[l - 1]).map(|(g, &z)| g * spec.activation.deriv(z)).collect();
        }
    }
    let norm = gs[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    let penalty = coeff * (norm - 1.0) * (norm - 1.0);
    if norm == 0.0 || coeff == 0.0 {
        return Ok(penalty);
    }
    let scale = coeff * 2.0 * (norm - 1.0) / norm;
    let mut gbar: Vec<f64> = gs[0].iter().map(|v| v * scale).collect();

    // Adjoint of the input-gradient pass, walked from the input side.
    let mut zbars: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut curved = false;
    for l in 0..n {
        let (inw, outw) = (w[l], w[l + 1]);
        let off = offsets[l];
        let mut dbar = vec![0.0; outw];
        {
            let weights = &params[off..off + inw * outw];
            let gw = &mut grad[off..off + inw * outw];
            for i in 0..inw {
                axpy(gbar[i], &deltas[l], &mut gw[i * outw..(i + 1) * outw]);
                axpy(gbar[i], &weights[i * outw..(i + 1) * outw], &mut dbar);
            }
        }
        let act = spec.activation_of(l);
        if !act.is_piecewise_linear() {
            curved = true;
        }
        if l + 1 < n {
            zbars[l] = dbar
                .iter()
                .zip(&gs[l + 1])
                .zip(&trace.pre[l])
                .map(|((d, g), &z)| act.second_deriv(z) * g * d)
                .collect();
            gbar = dbar.iter().zip(&trace.pre[l]).map(|(d, &z)| act.deriv(z) * d).collect();
        } else {
            zbars[l] = dbar.iter().zip(&trace.pre[l]).map(|(d, &z)| act.second_deriv(z) * d).collect();
        }
    }
    if !curved {
        return Ok(penalty);
    }

    // The pre-activations depend on every earlier weight and bias; push their
    // adjoints back through the forward pass.
    let mut hbar = vec![0.0; w[n]];
    for l in (0..n).rev() {
        let (inw, outw) = (w[l], w[l + 1]);
        let off = offsets[l];
        let act = spec.activation_of(l);
        let zt: Vec<f64> = zbars[l]
            .iter()
            .zip(&hbar)
            .zip(&trace.pre[l])
            .map(|((zb, hb), &z)| zb + act.deriv(z) * hb)
            .collect();
        let h_prev = &trace.post[l];
        {
            let (gw, gb) = grad[off..off + inw * outw + outw].split_at_mut(inw * outw);
            for i in 0..inw {
                axpy(h_prev[i], &zt, &mut gw[i * outw..(i + 1) * outw]);
            }
            axpy(1.0, &zt, gb);
        }
        if l > 0 {
            let weights = &params[off..off + inw * outw];
            hbar = (0..inw).map(|i| dot(&weights[i * outw..(i + 1) * outw], &zt)).collect();
        }
    }
    Ok(penalty)
}

/// Parameter gradient of `coeff * (|grad_x D(x)| - 1)^2`.
pub fn gp_param_grad(spec: &MlpSpec, params: &ParamVector, x: &[f64], coeff: f64) -> Result<ParamVector> {
    let mut grad = ParamVector::zeros(spec.param_count());
    gp_penalty_into(spec, params.as_slice(), x, coeff, grad.as_mut_slice())?;
    Ok(grad)
}
