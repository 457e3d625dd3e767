//! Fixed-architecture multilayer perceptrons with reverse-mode gradients.
//!
//! Hidden layers use `tanh`. The output layer is linear or sigmoid. A forward
//! pass returns a [`Tape`] holding every layer input; replaying it backward
//! gives adjoints for all weights, biases and the network input.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::rng::Rng;
use crate::error::{Error, Result};

/// A set of trainable tensors that can be walked in a fixed order.
///
/// The walk order defines the flattened parameter vector used by the
/// optimizer and by finite-difference checks.
pub trait Params {
    fn visit(&self, f: &mut dyn FnMut(&[f64]));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64]));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |s| out.extend_from_slice(s));
        out
    }

    fn assign(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(Error::shape("Params::assign", n, flat.len()));
        }
        let mut off = 0;
        self.visit_mut(&mut |s| {
            s.copy_from_slice(&flat[off..off + s.len()]);
            off += s.len();
        });
        Ok(())
    }

    fn scale(&mut self, k: f64) {
        self.visit_mut(&mut |s| s.iter_mut().for_each(|v| *v *= k));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
    output: OutputActivation,
}

/// Forward trace of one [`Mlp::apply`] call.
#[derive(Clone, Debug)]
pub struct Tape {
    /// Input to each layer; `inputs[0]` is the network input and
    /// `inputs[l]` for `l > 0` is the tanh output of layer `l - 1`.
    inputs: Vec<Matrix>,
    /// Final pre-activation values.
    logits: Matrix,
    output: Matrix,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Output-layer values before the output activation.
    pub fn logits(&self) -> &Matrix {
        &self.logits
    }

    pub fn input(&self) -> &Matrix {
        &self.inputs[0]
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_dims: &[usize], output: OutputActivation, rng: &mut Rng) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid(format!(
                "an MLP needs at least one layer of positive width, got dims {layer_dims:?}"
            )));
        }
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.inner().random_range(-limit..limit))
                    .collect();
                Dense {
                    weights: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            layers,
            output,
        })
    }

    /// Builds a network from explicit layers, validating the shapes.
    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("an MLP needs at least one layer"))?;
        let mut dims = vec![first.weights.cols()];
        for (i, l) in layers.iter().enumerate() {
            if l.weights.cols() != *dims.last().unwrap() || l.bias.len() != l.weights.rows() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("layer {i} input width {}", dims.last().unwrap()),
                    format!(
                        "weights {}x{}, bias {}",
                        l.weights.rows(),
                        l.weights.cols(),
                        l.bias.len()
                    ),
                ));
            }
            dims.push(l.weights.rows());
        }
        Ok(Mlp {
            layer_dims: dims,
            layers,
            output,
        })
    }

    /// Same shape, every parameter zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_mut(&mut |s| s.fill(0.0));
        z
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Forward pass over a batch (one record per row).
    pub fn apply(&self, input: &Matrix) -> Result<Tape> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(
                "Mlp::apply",
                format!("input width {}", self.input_dim()),
                input.cols(),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        inputs.push(input.clone());
        let last = self.layers.len() - 1;
        let mut logits = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = dense_forward(layer, &inputs[l]);
            if l == last {
                logits = Some(z);
            } else {
                z.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
                inputs.push(z);
            }
        }
        let logits = logits.expect("at least one layer");
        let output = match self.output {
            OutputActivation::Linear => logits.clone(),
            OutputActivation::Sigmoid => logits.map(sigmoid),
        };
        Ok(Tape {
            inputs,
            logits,
            output,
        })
    }

    /// Forward pass without keeping the trace.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.apply(input)?.output)
    }

    /// Replays `tape` backward from an adjoint on the activated output,
    /// adding parameter gradients into `grad` and returning the input adjoint.
    pub fn backward(&self, tape: &Tape, output_adjoint: &Matrix, grad: &mut Mlp) -> Result<Matrix> {
        if output_adjoint.shape() != tape.output.shape() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{:?}", tape.output.shape()),
                format!("{:?}", output_adjoint.shape()),
            ));
        }
        let d_logits = match self.output {
            OutputActivation::Linear => output_adjoint.clone(),
            OutputActivation::Sigmoid => {
                let mut d = output_adjoint.clone();
                for (dv, p) in d.as_mut_slice().iter_mut().zip(tape.output.as_slice()) {
                    *dv *= p * (1.0 - p);
                }
                d
            }
        };
        self.backward_logits(tape, &d_logits, grad)
    }

    /// Like [`Mlp::backward`] but the adjoint is on the pre-activation output.
    pub fn backward_logits(
        &self,
        tape: &Tape,
        logit_adjoint: &Matrix,
        grad: &mut Mlp,
    ) -> Result<Matrix> {
        if logit_adjoint.shape() != tape.logits.shape() {
            return Err(Error::shape(
                "Mlp::backward_logits",
                format!("{:?}", tape.logits.shape()),
                format!("{:?}", logit_adjoint.shape()),
            ));
        }
        if grad.layer_dims != self.layer_dims {
            return Err(Error::shape(
                "Mlp::backward gradient buffer",
                format!("{:?}", self.layer_dims),
                format!("{:?}", grad.layer_dims),
            ));
        }
        let mut delta = logit_adjoint.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &tape.inputs[l];
            let g = &mut grad.layers[l];
            let (n_out, n_in) = layer.weights.shape();
            for b in 0..delta.rows() {
                let d = delta.row(b);
                let x = input.row(b);
                let gw = g.weights.as_mut_slice();
                for o in 0..n_out {
                    let dv = d[o];
                    if dv == 0.0 {
                        continue;
                    }
                    g.bias[o] += dv;
                    for (w, xv) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                        *w += dv * xv;
                    }
                }
            }
            let mut d_in = Matrix::zeros(delta.rows(), n_in);
            let w = layer.weights.as_slice();
            for b in 0..delta.rows() {
                let d = delta.row(b);
                let out = d_in.row_mut(b);
                for o in 0..n_out {
                    let dv = d[o];
                    if dv == 0.0 {
                        continue;
                    }
                    for (acc, wv) in out.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *acc += dv * wv;
                    }
                }
            }
            if l > 0 {
                // through tanh: d/dz tanh(z) = 1 - tanh(z)^2
                for (dv, h) in d_in.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    *dv *= 1.0 - h * h;
                }
            }
            delta = d_in;
        }
        Ok(delta)
    }
}

fn dense_forward(layer: &Dense, input: &Matrix) -> Matrix {
    let (n_out, n_in) = layer.weights.shape();
    let w = layer.weights.as_slice();
    let mut out = Matrix::zeros(input.rows(), n_out);
    for b in 0..input.rows() {
        let x = input.row(b);
        let o = out.row_mut(b);
        for (k, ov) in o.iter_mut().enumerate() {
            let row = &w[k * n_in..(k + 1) * n_in];
            *ov = layer.bias[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    out
}

impl Params for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for l in &self.layers {
            f(l.weights.as_slice());
            f(&l.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.weights.as_mut_slice());
            f(&mut l.bias);
        }
    }
}
