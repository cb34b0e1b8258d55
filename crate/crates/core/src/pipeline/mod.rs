//! Transmitter and receiver assembly, channel-codec training and sweeps.

mod loss;
mod sweep;
mod train;

pub use loss::{combined_loss, Combiner, LossReport, LOSS_GUARD};
pub use sweep::{evaluate_sweep, records_to_csv, SweepGrid, SweepRecord, CSV_HEADER};
pub use train::{channel_batch_loss, evaluate_channel, train_channel, training_vectors, ChannelEpoch};

use crate::channel::{apply_channel, equalize, ChannelMode, ChannelRealization, SrParams};
use crate::codecs::{ChannelCodec, SemanticCodec};
use crate::error::{Error, Result};
use crate::frame::{Frame, FrameHeader, FrameRanking};
use crate::fusion::{fuse, FusionConfig};
use crate::media::ImageTensor;
use crate::ortho::{separate_payload, MixedFrame, OrthoBasis};
use crate::ranking::{crop, rank, restore, sensitivity_scores, Permutation, RankingMode};

/// Inclusive SNR interval in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrRange {
    pub lo: f64,
    pub hi: f64,
}

impl SnrRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("invalid SNR range {lo}:{hi}")));
        }
        Ok(SnrRange { lo, hi })
    }
}

/// Feature ordering used by the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sorting {
    Sensitivity,
    /// Seeded uniformly random permutation (ablation baseline).
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortingKind {
    Sensitivity,
    Random,
}

impl Sorting {
    pub fn kind(&self) -> SortingKind {
        match self {
            Sorting::Sensitivity => SortingKind::Sensitivity,
            Sorting::Random { .. } => SortingKind::Random,
        }
    }
}

impl std::str::FromStr for SortingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensitivity" => Ok(SortingKind::Sensitivity),
            "random" => Ok(SortingKind::Random),
            _ => Err(Error::Usage(format!("unknown sorting {s:?} (expected sensitivity|random)"))),
        }
    }
}

impl std::fmt::Display for SortingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SortingKind::Sensitivity => "sensitivity",
            SortingKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fusion: FusionConfig,
    pub ranking_mode: RankingMode,
    pub epsilon: f64,
    pub ratio: f64,
    pub basis: OrthoBasis,
    pub normalization: bool,
    pub sorting: Sorting,
    pub channel_mode: ChannelMode,
    pub sr: SrParams,
    /// Genie channel-state equalization at the receivers.
    pub equalize: bool,
    pub user_snr: [SnrRange; 2],
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub combiner: Combiner,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fusion: FusionConfig::default(),
            ranking_mode: RankingMode::Calibrated,
            epsilon: 0.01,
            ratio: 1.0,
            basis: OrthoBasis::default(),
            normalization: true,
            sorting: Sorting::Sensitivity,
            channel_mode: ChannelMode::SrFading,
            sr: SrParams::default(),
            equalize: false,
            user_snr: [SnrRange { lo: -10.0, hi: 0.0 }, SnrRange { lo: 0.0, hi: 10.0 }],
            batch_size: 8,
            epochs: 100,
            learning_rate: 1e-4,
            combiner: Combiner::Geometric,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sr.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("ranking epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::Config(format!("ratio must be in (0, 1], got {}", self.ratio)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be > 0".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        for r in &self.user_snr {
            SnrRange::new(r.lo, r.hi)?;
        }
        Ok(())
    }
}

/// Trained (or bypass) models shared by transmitter and receivers.
#[derive(Debug, Clone)]
pub struct Models {
    pub semantic: SemanticCodec,
    pub channel: ChannelCodec,
    /// Offline permutation for the calibrated ranking mode.
    pub calibrated: Option<Permutation>,
}

/// Sensitivity permutation for one pair: scores of both images averaged.
pub fn pair_ranking(semantic: &SemanticCodec, s1: &ImageTensor, s2: &ImageTensor, epsilon: f64) -> Result<Permutation> {
    let f1 = semantic.encode(s1)?;
    let f2 = semantic.encode(s2)?;
    let a = sensitivity_scores(&f1, semantic, s1.samples(), epsilon)?;
    let b = sensitivity_scores(&f2, semantic, s2.samples(), epsilon)?;
    let mean: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
    rank(&mean)
}

fn select_permutation(
    s1: &ImageTensor,
    s2: &ImageTensor,
    cfg: &PipelineConfig,
    models: &Models,
) -> Result<(Permutation, FrameRanking)> {
    let d = models.semantic.config.dim;
    match (cfg.sorting, cfg.ranking_mode) {
        (Sorting::Random { seed }, _) => Ok((Permutation::random(d, seed), FrameRanking::Random)),
        (Sorting::Sensitivity, RankingMode::PerFrame) => {
            Ok((pair_ranking(&models.semantic, s1, s2, cfg.epsilon)?, FrameRanking::PerFrame))
        }
        (Sorting::Sensitivity, RankingMode::Calibrated) => {
            let perm = models
                .calibrated
                .clone()
                .ok_or_else(|| Error::Config("calibrated ranking mode needs a calibrated permutation".into()))?;
            if perm.len() != d {
                return Err(Error::shape("calibrated permutation length", d, perm.len()));
            }
            Ok((perm, FrameRanking::Calibrated))
        }
    }
}

/// Transmit-side stages up to (not including) the channel encoder.
pub fn mix_pair(
    s1: &ImageTensor,
    s2: &ImageTensor,
    cfg: &PipelineConfig,
    models: &Models,
) -> Result<(MixedFrame, FrameHeader)> {
    let f1 = models.semantic.encode(s1)?;
    let f2 = models.semantic.encode(s2)?;
    let pair = fuse(&f1, &f2, &cfg.fusion)?;
    let (perm, ranking) = select_permutation(s1, s2, cfg, models)?;
    let (shared, spec) = crop(&pair.shared, &perm, cfg.ratio)?;
    let (delta, _) = crop(&pair.delta, &perm, cfg.ratio)?;
    let mixed = cfg.basis.embed_and_mix(&shared, &delta, cfg.normalization)?;
    let header = FrameHeader {
        dim: spec.dim,
        kept: spec.kept,
        q: cfg.basis.q(),
        ranking,
        perm: ranking.carries_permutation().then_some(perm),
        norm_scale: mixed.norm_scale,
    };
    Ok((mixed, header))
}

/// Encodes, fuses, sorts, crops, embeds, mixes and channel-encodes a pair.
pub fn transmit(s1: &ImageTensor, s2: &ImageTensor, cfg: &PipelineConfig, models: &Models) -> Result<Frame> {
    let (mixed, header) = mix_pair(s1, s2, cfg, models)?;
    let payload = models.channel.encode(&mixed.payload)?;
    let frame = Frame { header, payload };
    frame.validate()?;
    Ok(frame)
}

/// Passes the frame payload through one user's link; the header is
/// delivered intact.
pub fn deliver(frame: &Frame, link: &ChannelRealization, genie_equalize: bool) -> Result<Frame> {
    let mut payload = apply_channel(&frame.payload, link)?;
    if genie_equalize {
        equalize(&mut payload, link);
    }
    Ok(Frame {
        header: frame.header.clone(),
        payload,
    })
}

/// Recovers user `user` (1 or 2) from a received frame.
pub fn receive(frame: &Frame, user: usize, cfg: &PipelineConfig, models: &Models) -> Result<ImageTensor> {
    let features = receive_features(frame, user, cfg, models)?;
    models.semantic.decode(&features)
}

/// Receiver chain up to the semantic decoder input.
pub fn receive_features(frame: &Frame, user: usize, cfg: &PipelineConfig, models: &Models) -> Result<Vec<f64>> {
    if !(1..=2).contains(&user) {
        return Err(Error::Usage(format!("user index must be 1 or 2, got {user}")));
    }
    frame.validate()?;
    let h = &frame.header;
    let d = models.semantic.config.dim;
    if h.dim != d {
        return Err(Error::Frame(format!("frame d={} does not match semantic codec d={d}", h.dim)));
    }
    if h.q != cfg.basis.q() {
        return Err(Error::Frame(format!("frame q={} does not match basis q={}", h.q, cfg.basis.q())));
    }
    let perm = match &h.perm {
        Some(p) => p,
        None => models
            .calibrated
            .as_ref()
            .ok_or_else(|| Error::Config("calibrated frame received without a calibrated permutation".into()))?,
    };
    if perm.len() != d {
        return Err(Error::Frame(format!("permutation length {} does not match d={d}", perm.len())));
    }
    let decoded = models.channel.decode(&frame.payload, user - 1)?;
    if decoded.len() != frame.payload.len() {
        return Err(Error::shape("channel decoder output", frame.payload.len(), decoded.len()));
    }
    let shared = separate_payload(&decoded, h.norm_scale, cfg.basis.u1())?;
    let mut features = restore(&shared, perm, d)?;
    if user == 2 {
        let delta = separate_payload(&decoded, h.norm_scale, cfg.basis.u2())?;
        let delta = restore(&delta, perm, d)?;
        features.iter_mut().zip(&delta).for_each(|(f, x)| *f += x);
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::{build_channel_codec, build_semantic_codec, ChannelCodecConfig, SemanticCodecConfig};
    use crate::media::{gen_pair, PairSpec};
    use crate::ranking::calibrate_ranking;

    fn models(channel: ChannelCodec) -> Models {
        let cfg = SemanticCodecConfig {
            hidden: 24,
            dim: 8,
            ..SemanticCodecConfig::new(8, 8, 1)
        };
        Models {
            semantic: build_semantic_codec(&cfg, 11).unwrap(),
            channel,
            calibrated: Some(Permutation::new(vec![3, 1, 4, 0, 5, 2, 6, 7]).unwrap()),
        }
    }

    fn pair(seed: u64, edit: f64) -> (ImageTensor, ImageTensor) {
        gen_pair(&PairSpec { size: 8, edit_fraction: edit, ..Default::default() }, seed).unwrap()
    }

    #[test]
    fn identical_images_give_zero_delta_stream() {
        let m = models(ChannelCodec::Identity);
        let cfg = PipelineConfig {
            fusion: FusionConfig::new(0.0).unwrap(),
            ..Default::default()
        };
        let (a, _) = pair(1, 0.0);
        let (mixed, header) = mix_pair(&a, &a, &cfg, &m).unwrap();
        let delta = separate_payload(&mixed.payload, mixed.norm_scale, cfg.basis.u2()).unwrap();
        assert!(delta.iter().all(|&v| v == 0.0));
        assert_eq!(header.kept, 8);
        let r1 = receive(&transmit(&a, &a, &cfg, &m).unwrap(), 1, &cfg, &m).unwrap();
        let r2 = receive(&transmit(&a, &a, &cfg, &m).unwrap(), 2, &cfg, &m).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn payload_length_and_determinism() {
        let codec = build_channel_codec(&ChannelCodecConfig { encoder_widths: [4, 8], decoder_width: 4, ..Default::default() }, 2).unwrap();
        let m = models(ChannelCodec::Learned(codec));
        let (a, b) = pair(2, 0.3);
        for ratio in [0.25, 0.5, 1.0] {
            let cfg = PipelineConfig { ratio, ..Default::default() };
            let f = transmit(&a, &b, &cfg, &m).unwrap();
            assert_eq!(f.payload.len(), 4 * f.header.kept);
            assert_eq!(f.to_bytes().unwrap(), transmit(&a, &b, &cfg, &m).unwrap().to_bytes().unwrap());
        }
    }

    #[test]
    fn bypass_oracle() {
        let m = models(ChannelCodec::Identity);
        let cfg = PipelineConfig {
            fusion: FusionConfig::new(0.0).unwrap(),
            ..Default::default()
        };
        let (a, b) = pair(3, 0.4);
        let frame = deliver(&transmit(&a, &b, &cfg, &m).unwrap(), &ChannelRealization::ideal(), false).unwrap();
        for (user, src) in [(1, &a), (2, &b)] {
            let got = receive(&frame, user, &cfg, &m).unwrap();
            let want = m.semantic.reconstruct(src).unwrap();
            for (x, y) in got.samples().iter().zip(want.samples()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn per_frame_matches_calibration_on_the_pair() {
        let mut m = models(ChannelCodec::Identity);
        let (a, b) = pair(4, 0.3);
        let cal = calibrate_ranking(&[a.samples(), b.samples()], &m.semantic, &m.semantic, 0.01).unwrap();
        m.calibrated = Some(cal.perm.clone());
        let base = PipelineConfig { ratio: 0.5, ..Default::default() };
        let per = PipelineConfig { ranking_mode: RankingMode::PerFrame, ..base.clone() };
        let fc = transmit(&a, &b, &base, &m).unwrap();
        let fp = transmit(&a, &b, &per, &m).unwrap();
        assert_eq!(fp.header.perm.as_ref(), Some(&cal.perm));
        assert_eq!(fc.payload, fp.payload);
        for user in [1, 2] {
            assert_eq!(receive(&fc, user, &base, &m).unwrap(), receive(&fp, user, &per, &m).unwrap());
        }
    }

    #[test]
    fn random_sorting_carries_its_permutation() {
        let m = models(ChannelCodec::Identity);
        let cfg = PipelineConfig {
            sorting: Sorting::Random { seed: 9 },
            ratio: 0.5,
            ..Default::default()
        };
        let (a, b) = pair(5, 0.2);
        let f = transmit(&a, &b, &cfg, &m).unwrap();
        assert_eq!(f.header.ranking, FrameRanking::Random);
        assert_eq!(f.header.perm, Some(Permutation::random(8, 9)));
        assert!(receive(&f, 2, &cfg, &m).is_ok());
    }

    #[test]
    fn normalization_off_keeps_unit_scale() {
        let m = models(ChannelCodec::Identity);
        let cfg = PipelineConfig { normalization: false, fusion: FusionConfig::new(0.0).unwrap(), ..Default::default() };
        let (a, b) = pair(6, 0.2);
        let f = transmit(&a, &b, &cfg, &m).unwrap();
        assert_eq!(f.header.norm_scale, 1.0);
        let got = receive(&f, 1, &cfg, &m).unwrap();
        let want = m.semantic.reconstruct(&a).unwrap();
        for (x, y) in got.samples().iter().zip(want.samples()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn receiver_rejects_bad_frames() {
        let m = models(ChannelCodec::Identity);
        let cfg = PipelineConfig::default();
        let (a, b) = pair(7, 0.2);
        let good = transmit(&a, &b, &cfg, &m).unwrap();
        let mut f = good.clone();
        f.header.kept = 9;
        assert!(matches!(receive(&f, 1, &cfg, &m), Err(Error::Frame(_))));
        let mut f = good.clone();
        f.payload.truncate(5);
        assert!(matches!(receive(&f, 1, &cfg, &m), Err(Error::Frame(_))));
        let mut f = good.clone();
        f.header.q = 2;
        f.payload.truncate(16);
        assert!(matches!(receive(&f, 1, &cfg, &m), Err(Error::Frame(_))));
        assert!(receive(&good, 3, &cfg, &m).is_err());
        let mut nocal = m.clone();
        nocal.calibrated = None;
        assert!(matches!(transmit(&a, &b, &cfg, &nocal), Err(Error::Config(_))));
    }
}
