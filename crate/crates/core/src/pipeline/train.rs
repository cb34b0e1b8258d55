//! Channel-codec training over two fading links with a combined loss.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{combined_loss, mix_pair, Combiner, LossReport, Models, PipelineConfig};
use crate::channel::{apply_channel, equalize, ChannelRealization};
use crate::codecs::LearnedChannelCodec;
use crate::error::{Error, Result};
use crate::media::ImageTensor;
use crate::nnkit::{mse, mse_grad, Adam, AdamConfig, Gradients};
use crate::rng;

/// Per-epoch means over batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEpoch {
    pub combined: f64,
    pub users: [f64; 2],
}

/// Channel-encoder inputs: the normalized superposition for each pair.
pub fn training_vectors(
    pairs: &[(ImageTensor, ImageTensor)],
    cfg: &PipelineConfig,
    models: &Models,
) -> Result<Vec<Vec<f64>>> {
    pairs
        .iter()
        .map(|(a, b)| Ok(mix_pair(a, b, cfg, models)?.0.payload))
        .collect()
}

fn receive_link(y: &[f64], link: &ChannelRealization, genie: bool) -> Result<Vec<f64>> {
    let mut rx = apply_channel(y, link)?;
    if genie {
        equalize(&mut rx, link);
    }
    Ok(rx)
}

/// Batch-mean feature MSE per user, their combination, and (optionally)
/// gradients for the encoder and each decoder. `links[j][u]` is the link
/// of sample `j` to user `u`.
pub fn channel_batch_loss(
    codec: &LearnedChannelCodec,
    batch: &[&[f64]],
    links: &[[ChannelRealization; 2]],
    combiner: Combiner,
    genie: bool,
    with_grads: bool,
) -> Result<(LossReport, Option<(Gradients, Vec<Gradients>)>)> {
    if batch.is_empty() || batch.len() != links.len() {
        return Err(Error::shape("channel batch links", batch.len(), links.len()));
    }
    let inv_b = 1.0 / batch.len() as f64;
    let mut losses = [0.0f64; 2];
    let mut caches = Vec::with_capacity(batch.len());
    for (z, link) in batch.iter().zip(links) {
        let (y, enc_tape) = codec.encode_cached(z)?;
        let mut per_user = Vec::with_capacity(2);
        for u in 0..2 {
            let rx = receive_link(&y, &link[u], genie)?;
            let (out, tape) = codec.decoder_for(u).forward_cached(&rx)?;
            losses[u] += mse(&out, z)? * inv_b;
            per_user.push((out, tape));
        }
        caches.push((enc_tape, per_user));
    }
    let report = combined_loss(&losses, combiner)?;
    if !with_grads {
        return Ok((report, None));
    }
    let mut g_enc = Gradients::zeros_like(&codec.encoder);
    let mut g_dec: Vec<Gradients> = codec.decoders.iter().map(Gradients::zeros_like).collect();
    for ((z, link), (enc_tape, per_user)) in batch.iter().zip(links).zip(&caches) {
        let mut gy = vec![0.0; z.len()];
        for (u, (out, tape)) in per_user.iter().enumerate() {
            let weight = report.grads[u] * inv_b;
            let g_out: Vec<f64> = mse_grad(out, z)?.into_iter().map(|g| g * weight).collect();
            let slot = u.min(g_dec.len() - 1);
            let g_rx = codec.decoder_for(u).backward_into(tape, &g_out, &mut g_dec[slot])?;
            let amp = if genie { 1.0 } else { link[u].gain.sqrt() };
            gy.iter_mut().zip(&g_rx).for_each(|(a, b)| *a += amp * b);
        }
        codec.encode_backward(enc_tape, &gy, &mut g_enc)?;
    }
    Ok((report, Some((g_enc, g_dec))))
}

fn draw_links(cfg: &PipelineConfig, seed: u64, coords: [u64; 2], count: usize) -> Result<Vec<[ChannelRealization; 2]>> {
    let mut r = rng::substream(seed, &[rng::label("snr"), coords[0], coords[1]]);
    let snr: Vec<f64> = cfg
        .user_snr
        .iter()
        .map(|range| if range.hi > range.lo { r.random_range(range.lo..=range.hi) } else { range.lo })
        .collect();
    (0..count)
        .map(|j| {
            let mut pair = [ChannelRealization::ideal(); 2];
            for (u, slot) in pair.iter_mut().enumerate() {
                let s = rng::derive_seed(seed, &[rng::label("link"), coords[0], coords[1], j as u64, u as u64]);
                *slot = ChannelRealization::draw(cfg.channel_mode, &cfg.sr, snr[u], s)?;
            }
            Ok(pair)
        })
        .collect()
}

/// Trains the channel encoder and decoder(s) with Adam. SNRs are drawn per
/// batch; fading gains and noise per sample and user.
pub fn train_channel(
    codec: &mut LearnedChannelCodec,
    dataset: &[Vec<f64>],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Vec<ChannelEpoch>> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("channel training set is empty".into()));
    }
    let adam = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut enc_opt = Adam::for_model(adam, &codec.encoder);
    let mut dec_opts: Vec<Adam> = codec.decoders.iter().map(|d| Adam::for_model(adam, d)).collect();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffle = rng::substream(seed, &[rng::label("channel-order")]);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut sum = ChannelEpoch { combined: 0.0, users: [0.0; 2] };
        let mut batches = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&[f64]> = idx.iter().map(|&i| dataset[i].as_slice()).collect();
            let links = draw_links(cfg, seed, [epoch as u64, b as u64], batch.len())?;
            let (report, grads) = channel_batch_loss(codec, &batch, &links, cfg.combiner, cfg.equalize, true)?;
            let (g_enc, g_dec) = grads.expect("gradients requested");
            if !report.combined.is_finite() || !g_enc.is_finite() || g_dec.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "channel training diverged at epoch {} batch {} (losses {:?})",
                    epoch + 1,
                    b + 1,
                    report.losses
                )));
            }
            enc_opt.step_model(&mut codec.encoder, &g_enc)?;
            for ((dec, opt), g) in codec.decoders.iter_mut().zip(&mut dec_opts).zip(&g_dec) {
                opt.step_model(dec, g)?;
            }
            sum.combined += report.combined;
            sum.users[0] += report.losses[0];
            sum.users[1] += report.losses[1];
            batches += 1;
        }
        let n = batches as f64;
        curve.push(ChannelEpoch {
            combined: sum.combined / n,
            users: [sum.users[0] / n, sum.users[1] / n],
        });
    }
    Ok(curve)
}

/// Mean per-user feature MSE over `rounds` passes of `dataset`, with SNRs
/// drawn from the configured ranges.
pub fn evaluate_channel(
    codec: &LearnedChannelCodec,
    dataset: &[Vec<f64>],
    cfg: &PipelineConfig,
    rounds: usize,
    seed: u64,
) -> Result<[f64; 2]> {
    if dataset.is_empty() || rounds == 0 {
        return Err(Error::Data("evaluation needs data and at least one round".into()));
    }
    let mut total = [0.0; 2];
    for round in 0..rounds {
        for (i, z) in dataset.iter().enumerate() {
            let links = draw_links(cfg, seed, [round as u64, i as u64], 1)?;
            let (report, _) = channel_batch_loss(codec, &[z.as_slice()], &links, cfg.combiner, cfg.equalize, false)?;
            total[0] += report.losses[0];
            total[1] += report.losses[1];
        }
    }
    let n = (rounds * dataset.len()) as f64;
    Ok([total[0] / n, total[1] / n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{build_channel_codec, ChannelCodecConfig};

    fn small_codec(seed: u64) -> LearnedChannelCodec {
        let cfg = ChannelCodecConfig {
            encoder_widths: [4, 6],
            decoder_width: 4,
            ..Default::default()
        };
        build_channel_codec(&cfg, seed).unwrap()
    }

    fn data() -> Vec<Vec<f64>> {
        (0..6).map(|k| (0..8).map(|i| ((i * 3 + k) as f64 * 0.7).sin()).collect()).collect()
    }

    #[test]
    fn zero_epochs_leaves_models_unchanged() {
        let init = small_codec(1);
        let mut codec = init.clone();
        let cfg = PipelineConfig { epochs: 0, ..Default::default() };
        assert!(train_channel(&mut codec, &data(), &cfg, 3).unwrap().is_empty());
        assert_eq!(codec, init);
    }

    #[test]
    fn training_is_deterministic_and_objective_dependent() {
        let cfg = PipelineConfig { epochs: 3, batch_size: 4, learning_rate: 1e-3, ..Default::default() };
        let run = |cfg: &PipelineConfig| {
            let mut c = small_codec(2);
            let curve = train_channel(&mut c, &data(), cfg, 4).unwrap();
            (c, curve)
        };
        let (c1, k1) = run(&cfg);
        let (c2, k2) = run(&cfg);
        assert_eq!(c1, c2);
        assert_eq!(k1, k2);
        let arith = PipelineConfig { combiner: Combiner::Arithmetic, ..cfg };
        let (c3, k3) = run(&arith);
        assert_ne!(c1, c3);
        assert_ne!(k1, k3);
    }

    #[test]
    fn ideal_links_with_identity_like_batches() {
        let codec = small_codec(5);
        let d = data();
        let batch: Vec<&[f64]> = d.iter().map(|v| v.as_slice()).collect();
        let links = vec![[ChannelRealization::ideal(); 2]; batch.len()];
        let (report, _) = channel_batch_loss(&codec, &batch, &links, Combiner::Geometric, false, false).unwrap();
        // identical noiseless links through a shared decoder give equal losses
        assert_eq!(report.losses[0], report.losses[1]);
        assert!((report.combined - report.losses[0]).abs() < 1e-12 * report.losses[0]);
    }
}
