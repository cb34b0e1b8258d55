//! Semantic and channel codecs.
//!
//! The semantic codec is a dense autoencoder between images and `d`-dim
//! feature vectors. The channel codec is a length-preserving 1-D
//! convolutional autoencoder: the encoder output is rescaled to unit average
//! power before it enters the link.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::media::ImageTensor;
use crate::nnkit::{mse_with_grad, Adam, AdamConfig, Gradients, Layer, LayerSpec, Model, Tape};
use crate::ranking::{FeatureDecoder, FeatureEncoder};
use crate::rng;

const MIN_SIGNAL_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SemanticCodecConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub hidden: usize,
    pub dim: usize,
}

impl SemanticCodecConfig {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        SemanticCodecConfig {
            height,
            width,
            channels,
            hidden: 256,
            dim: 64,
        }
    }

    pub fn input_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || !matches!(self.channels, 1 | 3) {
            return Err(Error::Config(format!(
                "invalid image shape {}x{}x{}",
                self.height, self.width, self.channels
            )));
        }
        if self.hidden == 0 {
            return Err(Error::Config("semantic hidden width must be > 0".into()));
        }
        if self.dim < 8 || self.dim % 2 != 0 {
            return Err(Error::Config(format!("feature dimension must be even and >= 8, got {}", self.dim)));
        }
        Ok(())
    }
}

/// Dense image autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticCodec {
    pub config: SemanticCodecConfig,
    pub encoder: Model,
    pub decoder: Model,
}

pub fn build_semantic_codec(cfg: &SemanticCodecConfig, seed: u64) -> Result<SemanticCodec> {
    cfg.validate()?;
    let n = cfg.input_len();
    let mut r = rng::stream(seed);
    let encoder = Model::from_specs(
        &[
            LayerSpec::Dense { in_dim: n, out_dim: cfg.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { in_dim: cfg.hidden, out_dim: cfg.dim },
        ],
        &mut r,
    )?;
    let decoder = Model::from_specs(
        &[
            LayerSpec::Dense { in_dim: cfg.dim, out_dim: cfg.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { in_dim: cfg.hidden, out_dim: n },
        ],
        &mut r,
    )?;
    Ok(SemanticCodec {
        config: *cfg,
        encoder,
        decoder,
    })
}

impl SemanticCodec {
    /// Reassembles a codec from stored models, checking they fit `config`.
    pub fn from_models(config: SemanticCodecConfig, encoder: Model, decoder: Model) -> Result<Self> {
        config.validate()?;
        let enc = encoder.forward(&vec![0.0; config.input_len()])?;
        if enc.len() != config.dim {
            return Err(Error::shape("semantic encoder output", config.dim, enc.len()));
        }
        let dec = decoder.forward(&vec![0.0; config.dim])?;
        if dec.len() != config.input_len() {
            return Err(Error::shape("semantic decoder output", config.input_len(), dec.len()));
        }
        Ok(SemanticCodec {
            config,
            encoder,
            decoder,
        })
    }

    fn check_image(&self, image: &ImageTensor) -> Result<()> {
        let c = &self.config;
        if image.shape() != (c.height, c.width, c.channels) {
            return Err(Error::Data(format!(
                "image shape {:?} does not match codec shape {:?}",
                image.shape(),
                (c.height, c.width, c.channels)
            )));
        }
        Ok(())
    }

    pub fn encode(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.check_image(image)?;
        self.encoder.forward(image.samples())
    }

    /// Unclamped decoder output.
    pub fn decode_raw(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.config.dim {
            return Err(Error::shape("semantic decoder input", self.config.dim, features.len()));
        }
        self.decoder.forward(features)
    }

    /// Decoded image clamped to `[0, 1]`.
    pub fn decode(&self, features: &[f64]) -> Result<ImageTensor> {
        let c = &self.config;
        let raw = self.decode_raw(features)?;
        Ok(ImageTensor::new(c.height, c.width, c.channels, raw)?.clamped())
    }

    /// Re-expresses the features in standardized coordinates: each dimension
    /// gets zero mean and unit variance over `dataset`. The affine change is
    /// folded into the encoder's last layer and the decoder's first layer,
    /// so `decode(encode(s))` is unchanged up to rounding.
    pub fn standardize_features(&mut self, dataset: &[ImageTensor]) -> Result<()> {
        if dataset.is_empty() {
            return Err(Error::Data("cannot standardize features on an empty set".into()));
        }
        let d = self.config.dim;
        let feats = dataset.iter().map(|s| self.encode(s)).collect::<Result<Vec<_>>>()?;
        let n = feats.len() as f64;
        let mean: Vec<f64> = (0..d).map(|i| feats.iter().map(|f| f[i]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|i| {
                let var = feats.iter().map(|f| (f[i] - mean[i]).powi(2)).sum::<f64>() / n;
                if var.sqrt() > 1e-9 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let (Some(Layer::Dense(enc)), Some(Layer::Dense(dec))) =
            (self.encoder.layers.last_mut(), self.decoder.layers.first_mut())
        else {
            return Err(Error::Usage("feature standardization needs dense boundary layers".into()));
        };
        for i in 0..d {
            let row = &mut enc.weight[i * enc.in_dim..(i + 1) * enc.in_dim];
            row.iter_mut().for_each(|w| *w /= scale[i]);
            enc.bias[i] = (enc.bias[i] - mean[i]) / scale[i];
        }
        for o in 0..dec.out_dim {
            let row = &mut dec.weight[o * d..(o + 1) * d];
            dec.bias[o] += row.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>();
            row.iter_mut().zip(&scale).for_each(|(w, s)| *w *= s);
        }
        Ok(())
    }

    /// `decode(encode(image))`.
    pub fn reconstruct(&self, image: &ImageTensor) -> Result<ImageTensor> {
        self.decode(&self.encode(image)?)
    }
}

impl FeatureEncoder for SemanticCodec {
    fn encode_features(&self, source: &[f64]) -> Result<Vec<f64>> {
        if source.len() != self.config.input_len() {
            return Err(Error::shape("semantic encoder input", self.config.input_len(), source.len()));
        }
        self.encoder.forward(source)
    }
}

impl FeatureDecoder for SemanticCodec {
    fn decode_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.decode_raw(features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for SemanticTrainConfig {
    fn default() -> Self {
        SemanticTrainConfig {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-3,
        }
    }
}

/// Noiseless reconstruction training of encoder and decoder jointly.
/// Returns the per-epoch mean MSE.
pub fn train_semantic(
    codec: &mut SemanticCodec,
    dataset: &[ImageTensor],
    cfg: &SemanticTrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::Data("semantic training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be > 0".into()));
    }
    for image in dataset {
        codec.check_image(image)?;
    }
    let adam_cfg = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut enc_opt = Adam::for_model(adam_cfg, &codec.encoder);
    let mut dec_opt = Adam::for_model(adam_cfg, &codec.decoder);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffle = rng::substream(seed, &[rng::label("semantic-order")]);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut g_enc = Gradients::zeros_like(&codec.encoder);
            let mut g_dec = Gradients::zeros_like(&codec.decoder);
            let mut batch_loss = 0.0;
            for &i in batch {
                let x = dataset[i].samples();
                let (f, enc_tape) = codec.encoder.forward_cached(x)?;
                let (out, dec_tape) = codec.decoder.forward_cached(&f)?;
                let (loss, g) = mse_with_grad(&out, x)?;
                let gf = codec.decoder.backward_into(&dec_tape, &g, &mut g_dec)?;
                codec.encoder.backward_into(&enc_tape, &gf, &mut g_enc)?;
                batch_loss += loss;
            }
            if !batch_loss.is_finite() || !g_enc.is_finite() || !g_dec.is_finite() {
                return Err(Error::Numeric(format!(
                    "semantic training diverged at epoch {} batch {}",
                    epoch + 1,
                    b + 1
                )));
            }
            let inv = 1.0 / batch.len() as f64;
            g_enc.scale(inv);
            g_dec.scale(inv);
            enc_opt.step_model(&mut codec.encoder, &g_enc)?;
            dec_opt.step_model(&mut codec.decoder, &g_dec)?;
            total += batch_loss;
        }
        curve.push(total / dataset.len() as f64);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelCodecConfig {
    pub encoder_widths: [usize; 2],
    pub decoder_width: usize,
    pub kernel_size: usize,
    pub shared_decoder: bool,
}

impl Default for ChannelCodecConfig {
    fn default() -> Self {
        ChannelCodecConfig {
            encoder_widths: [64, 128],
            decoder_width: 64,
            kernel_size: 3,
            shared_decoder: true,
        }
    }
}

impl ChannelCodecConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.encoder_widths;
        if a == 0 || b < a || self.decoder_width == 0 {
            return Err(Error::Config(format!(
                "channel codec widths must be positive and non-decreasing, got {:?}/{}",
                self.encoder_widths, self.decoder_width
            )));
        }
        if self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!("kernel size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }

    fn encoder_specs(&self) -> Vec<LayerSpec> {
        let k = self.kernel_size;
        let [a, b] = self.encoder_widths;
        vec![
            LayerSpec::Conv1d { channels_in: 1, channels_out: a, kernel_size: k },
            LayerSpec::Relu,
            LayerSpec::Conv1d { channels_in: a, channels_out: b, kernel_size: k },
            LayerSpec::Relu,
            LayerSpec::Conv1d { channels_in: b, channels_out: 1, kernel_size: 1 },
        ]
    }

    fn decoder_specs(&self) -> Vec<LayerSpec> {
        let k = self.kernel_size;
        vec![
            LayerSpec::Conv1d { channels_in: 1, channels_out: self.decoder_width, kernel_size: k },
            LayerSpec::Relu,
            LayerSpec::Conv1d { channels_in: self.decoder_width, channels_out: 1, kernel_size: k },
        ]
    }
}

/// Trainable convolutional channel codec.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedChannelCodec {
    pub encoder: Model,
    /// One shared decoder, or one per user.
    pub decoders: Vec<Model>,
}

/// Channel codec used by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelCodec {
    /// Pass-through on both sides.
    Identity,
    Learned(LearnedChannelCodec),
}

pub fn build_channel_codec(cfg: &ChannelCodecConfig, seed: u64) -> Result<LearnedChannelCodec> {
    cfg.validate()?;
    let mut r = rng::stream(seed);
    let encoder = Model::from_specs(&cfg.encoder_specs(), &mut r)?;
    let count = if cfg.shared_decoder { 1 } else { 2 };
    let decoders = (0..count)
        .map(|_| Model::from_specs(&cfg.decoder_specs(), &mut r))
        .collect::<Result<_>>()?;
    Ok(LearnedChannelCodec { encoder, decoders })
}

/// `x · sqrt(n) / ‖x‖`, so the result has unit average power.
pub fn power_normalize(x: &[f64]) -> Vec<f64> {
    let s = (x.len() as f64).sqrt() / norm(x).max(MIN_SIGNAL_NORM);
    x.iter().map(|v| v * s).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Vector-Jacobian product of [`power_normalize`] at `x`.
pub fn power_normalize_backward(x: &[f64], grad: &[f64]) -> Vec<f64> {
    let nrm = norm(x);
    if nrm < MIN_SIGNAL_NORM {
        let s = (x.len() as f64).sqrt() / MIN_SIGNAL_NORM;
        return grad.iter().map(|g| s * g).collect();
    }
    let s = (x.len() as f64).sqrt() / nrm;
    let proj = x.iter().zip(grad).map(|(a, b)| a * b).sum::<f64>() / (nrm * nrm);
    x.iter().zip(grad).map(|(xi, gi)| s * (gi - xi * proj)).collect()
}

/// Cached encoder pass for backpropagation.
#[derive(Debug, Clone)]
pub struct EncoderTape {
    tape: Tape,
    pre_norm: Vec<f64>,
}

impl LearnedChannelCodec {
    pub fn decoder_for(&self, user: usize) -> &Model {
        &self.decoders[user.min(self.decoders.len() - 1)]
    }

    pub fn encode(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(power_normalize(&self.encoder.forward(z)?))
    }

    pub fn encode_cached(&self, z: &[f64]) -> Result<(Vec<f64>, EncoderTape)> {
        let (pre_norm, tape) = self.encoder.forward_cached(z)?;
        Ok((power_normalize(&pre_norm), EncoderTape { tape, pre_norm }))
    }

    /// Backpropagates a gradient on the normalized output into `grads`.
    pub fn encode_backward(&self, tape: &EncoderTape, grad: &[f64], grads: &mut Gradients) -> Result<Vec<f64>> {
        let g = power_normalize_backward(&tape.pre_norm, grad);
        self.encoder.backward_into(&tape.tape, &g, grads)
    }

    /// `user` is 0-based; with a shared decoder every user maps to it.
    pub fn decode(&self, y: &[f64], user: usize) -> Result<Vec<f64>> {
        self.decoder_for(user).forward(y)
    }

    pub fn is_shared(&self) -> bool {
        self.decoders.len() == 1
    }
}

impl ChannelCodec {
    pub fn encode(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            ChannelCodec::Identity => Ok(z.to_vec()),
            ChannelCodec::Learned(c) => c.encode(z),
        }
    }

    pub fn decode(&self, y: &[f64], user: usize) -> Result<Vec<f64>> {
        match self {
            ChannelCodec::Identity => Ok(y.to_vec()),
            ChannelCodec::Learned(c) => c.decode(y, user),
        }
    }
}
