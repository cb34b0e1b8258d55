//! A minimal differentiable network kit.
//!
//! Networks are straight chains of [`Layer`]s over flat `f64` vectors.
//! `Conv1d` layers read their input as `channels_in` rows of equal length
//! (channel-major) and are length-agnostic; `Dense` layers have fixed
//! dimensions. [`Model::forward_cached`] records a [`Tape`] of layer inputs
//! that [`Model::backward`] consumes.

mod adam;
mod gradcheck;
mod io;
mod loss;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::grad_check;
pub use io::{read_model, read_model_file, write_model, write_model_file, MODEL_MAGIC, MODEL_VERSION};
pub use loss::{mse, mse_grad, mse_with_grad};

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use crate::error::{Error, Result};

/// Architecture description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Conv1d {
        channels_in: usize,
        channels_out: usize,
        kernel_size: usize,
    },
    Relu,
}

/// Uniform Xavier/Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn xavier_fill<R: Rng + ?Sized>(n: usize, fan_in: usize, fan_out: usize, rng: &mut R) -> Vec<f64> {
    let bound = xavier_bound(fan_in, fan_out);
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite xavier bound");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Fully connected layer `y = W x + b`, `W` row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Stride-1 cross-correlation with zero "same" padding.
///
/// Weights are laid out `(channels_out, channels_in, kernel_size)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub channels_in: usize,
    pub channels_out: usize,
    pub kernel_size: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    Relu,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.clone();
        for (row, yo) in self.weight.chunks_exact(self.in_dim).zip(y.iter_mut()) {
            *yo += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        y
    }

    fn backward(&self, x: &[f64], g: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let mut gx = vec![0.0; self.in_dim];
        for (o, &go) in g.iter().enumerate() {
            gb[o] += go;
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for ((gwi, &xi), (gxi, &wi)) in grow.iter_mut().zip(x).zip(gx.iter_mut().zip(row)) {
                *gwi += go * xi;
                *gxi += go * wi;
            }
        }
        gx
    }
}

impl Conv1d {
    pub fn zeros(channels_in: usize, channels_out: usize, kernel_size: usize) -> Self {
        Conv1d {
            channels_in,
            channels_out,
            kernel_size,
            weight: vec![0.0; channels_out * channels_in * kernel_size],
            bias: vec![0.0; channels_out],
        }
    }

    pub fn padding(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    /// Valid output range `[lo, hi)` for kernel tap `k` on sequences of
    /// length `len`, plus the signed input offset of that tap.
    fn tap_range(&self, k: usize, len: usize) -> (usize, usize, isize) {
        let off = k as isize - self.padding() as isize;
        let lo = (-off).max(0) as usize;
        let hi = (len as isize - off).clamp(0, len as isize) as usize;
        (lo, hi.max(lo), off)
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let len = x.len() / self.channels_in;
        let ks = self.kernel_size;
        let mut y = vec![0.0; self.channels_out * len];
        for o in 0..self.channels_out {
            let yo = &mut y[o * len..(o + 1) * len];
            yo.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.channels_in {
                let xi = &x[i * len..(i + 1) * len];
                for k in 0..ks {
                    let w = self.weight[(o * self.channels_in + i) * ks + k];
                    let (lo, hi, off) = self.tap_range(k, len);
                    let src = &xi[(lo as isize + off) as usize..(hi as isize + off) as usize];
                    for (d, s) in yo[lo..hi].iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        y
    }

    fn backward(&self, x: &[f64], g: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let len = x.len() / self.channels_in;
        let ks = self.kernel_size;
        let mut gx = vec![0.0; x.len()];
        for o in 0..self.channels_out {
            let go = &g[o * len..(o + 1) * len];
            gb[o] += go.iter().sum::<f64>();
            for i in 0..self.channels_in {
                let xi = &x[i * len..(i + 1) * len];
                let gxi = &mut gx[i * len..(i + 1) * len];
                for k in 0..ks {
                    let widx = (o * self.channels_in + i) * ks + k;
                    let w = self.weight[widx];
                    let (lo, hi, off) = self.tap_range(k, len);
                    let s_lo = (lo as isize + off) as usize;
                    let s_hi = (hi as isize + off) as usize;
                    let mut acc = 0.0;
                    for ((gv, xs), gxs) in go[lo..hi].iter().zip(&xi[s_lo..s_hi]).zip(&mut gxi[s_lo..s_hi]) {
                        acc += gv * xs;
                        *gxs += w * gv;
                    }
                    gw[widx] += acc;
                }
            }
        }
        gx
    }
}

impl Layer {
    /// Builds a layer from its spec with Xavier-uniform weights and zero biases.
    pub fn from_spec<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        match spec {
            LayerSpec::Dense { in_dim, out_dim } => {
                if in_dim == 0 || out_dim == 0 {
                    return Err(Error::Config("dense dims must be > 0".into()));
                }
                Ok(Layer::Dense(Dense {
                    in_dim,
                    out_dim,
                    weight: xavier_fill(in_dim * out_dim, in_dim, out_dim, rng),
                    bias: vec![0.0; out_dim],
                }))
            }
            LayerSpec::Conv1d {
                channels_in,
                channels_out,
                kernel_size,
            } => {
                if channels_in == 0 || channels_out == 0 {
                    return Err(Error::Config("conv1d channel counts must be > 0".into()));
                }
                if kernel_size % 2 == 0 {
                    return Err(Error::Config(format!("conv1d kernel_size must be odd, got {kernel_size}")));
                }
                let n = channels_out * channels_in * kernel_size;
                Ok(Layer::Conv1d(Conv1d {
                    channels_in,
                    channels_out,
                    kernel_size,
                    weight: xavier_fill(n, channels_in * kernel_size, channels_out * kernel_size, rng),
                    bias: vec![0.0; channels_out],
                }))
            }
            LayerSpec::Relu => Ok(Layer::Relu),
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                in_dim: d.in_dim,
                out_dim: d.out_dim,
            },
            Layer::Conv1d(c) => LayerSpec::Conv1d {
                channels_in: c.channels_in,
                channels_out: c.channels_out,
                kernel_size: c.kernel_size,
            },
            Layer::Relu => LayerSpec::Relu,
        }
    }

    fn check_input(&self, index: usize, len: usize) -> Result<()> {
        match self {
            Layer::Dense(d) if len != d.in_dim => Err(Error::shape(format!("layer {index} (dense) input"), d.in_dim, len)),
            Layer::Conv1d(c) if len == 0 || len % c.channels_in != 0 => {
                let expected = c.channels_in * (len / c.channels_in).max(1);
                Err(Error::shape(format!("layer {index} (conv1d) input"), expected, len))
            }
            _ => Ok(()),
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Layer::Dense(d) => d.forward(x),
            Layer::Conv1d(c) => c.forward(x),
            Layer::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Layer::Dense(_) | Layer::Conv1d(_) => 2,
            Layer::Relu => 0,
        }
    }
}

/// Layer inputs recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Vec<f64>>,
    output_len: usize,
}

impl Tape {
    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }
}

/// Per-tensor gradients, aligned with [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            tensors: model.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }
}

/// A chain of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<Layer>,
}

impl Model {
    pub fn new(layers: Vec<Layer>) -> Self {
        Model { layers }
    }

    pub fn from_specs<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let layers = specs.iter().map(|&s| Layer::from_spec(s, rng)).collect::<Result<_>>()?;
        Ok(Model { layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// Parameter tensors in layer order, weight before bias.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => out.extend([d.weight.as_slice(), d.bias.as_slice()]),
                Layer::Conv1d(c) => out.extend([c.weight.as_slice(), c.bias.as_slice()]),
                Layer::Relu => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => out.extend([d.weight.as_mut_slice(), d.bias.as_mut_slice()]),
                Layer::Conv1d(c) => out.extend([c.weight.as_mut_slice(), c.bias.as_mut_slice()]),
                Layer::Relu => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check_input(i, x.len())?;
            x = layer.forward(&x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check_input(i, x.len())?;
            let y = layer.forward(&x);
            inputs.push(x);
            x = y;
        }
        let output_len = x.len();
        Ok((x, Tape { inputs, output_len }))
    }

    /// Backpropagates `grad_output` through the pass recorded in `tape`,
    /// accumulating parameter gradients into `grads` and returning the
    /// gradient with respect to the input.
    pub fn backward_into(&self, tape: &Tape, grad_output: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        if tape.inputs.len() != self.layers.len() || grad_output.len() != tape.output_len {
            return Err(Error::Usage(
                "backward called without a matching forward pass on this model".into(),
            ));
        }
        let expected_tensors: usize = self.layers.iter().map(Layer::param_count).sum();
        if grads.tensors.len() != expected_tensors {
            return Err(Error::shape("gradient tensor count", expected_tensors, grads.tensors.len()));
        }
        for (i, (layer, x)) in self.layers.iter().zip(&tape.inputs).enumerate() {
            if layer.check_input(i, x.len()).is_err() {
                return Err(Error::Usage(format!("tape input {i} does not match this model")));
            }
        }

        let mut slot = expected_tensors;
        let mut g = grad_output.to_vec();
        for (layer, x) in self.layers.iter().zip(&tape.inputs).rev() {
            g = match layer {
                Layer::Relu => x.iter().zip(&g).map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 }).collect(),
                Layer::Dense(d) => {
                    slot -= 2;
                    let (w, b) = grads.tensors[slot..slot + 2].split_at_mut(1);
                    d.backward(x, &g, &mut w[0], &mut b[0])
                }
                Layer::Conv1d(c) => {
                    slot -= 2;
                    let (w, b) = grads.tensors[slot..slot + 2].split_at_mut(1);
                    c.backward(x, &g, &mut w[0], &mut b[0])
                }
            };
        }
        Ok(g)
    }

    /// Like [`Model::backward_into`] with fresh zero gradients.
    pub fn backward(&self, tape: &Tape, grad_output: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let gx = self.backward_into(tape, grad_output, &mut grads)?;
        Ok((grads, gx))
    }
}
