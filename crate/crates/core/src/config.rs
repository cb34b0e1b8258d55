//! Experiment configuration files.
//!
//! A flat text format, one `section.key = value` per line, `#` starts a
//! comment. Every key has a built-in default; unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::channel::SrParams;
use crate::codecs::{ChannelCodecConfig, SemanticCodecConfig, SemanticTrainConfig};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::ortho::OrthoBasis;
use crate::pipeline::{PipelineConfig, SnrRange, SortingKind};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub snr: String,
    pub ratio: String,
    pub sorting: String,
    pub normalization: String,
    pub seeds: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            snr: "-10:10:5".into(),
            ratio: "1".into(),
            sorting: "sensitivity".into(),
            normalization: "on".into(),
            seeds: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data_dir: PathBuf,
    pub eval_dir: PathBuf,
    pub semantic_hidden: usize,
    pub semantic_dim: usize,
    pub semantic_train: SemanticTrainConfig,
    /// Rescale features to zero mean, unit variance after semantic training.
    pub semantic_standardize: bool,
    pub channel_codec: ChannelCodecConfig,
    pub ranking_file: PathBuf,
    pub pipeline: PipelineConfig,
    pub sweep: SweepSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            data_dir: "data".into(),
            eval_dir: "data".into(),
            semantic_hidden: 256,
            semantic_dim: 64,
            semantic_train: SemanticTrainConfig::default(),
            semantic_standardize: true,
            channel_codec: ChannelCodecConfig::default(),
            ranking_file: "ranking.txt".into(),
            pipeline: PipelineConfig::default(),
            sweep: SweepSettings::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|t| parse_value(key, t.trim())).collect()
}

fn parse_snr_range(key: &str, value: &str) -> Result<SnrRange> {
    let (lo, hi) = value
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("{key} must be lo:hi, got {value:?}")))?;
    SnrRange::new(parse_value(key, lo.trim())?, parse_value(key, hi.trim())?)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {line:?}", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, strip_kind(&e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("override must be key=value, got {assignment:?}")))?;
        self.set(key.trim(), value.trim())?;
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim_matches('"');
        let p = &mut self.pipeline;
        match key {
            "run.seed" => self.seed = parse_value(key, value)?,
            "data.dir" => self.data_dir = value.into(),
            "data.eval_dir" => self.eval_dir = value.into(),
            "semantic.hidden" => self.semantic_hidden = parse_value(key, value)?,
            "semantic.dim" => self.semantic_dim = parse_value(key, value)?,
            "semantic.epochs" => self.semantic_train.epochs = parse_value(key, value)?,
            "semantic.batch_size" => self.semantic_train.batch_size = parse_value(key, value)?,
            "semantic.learning_rate" => self.semantic_train.learning_rate = parse_value(key, value)?,
            "semantic.standardize" => self.semantic_standardize = parse_bool(key, value)?,
            "channel_codec.kernel_size" => self.channel_codec.kernel_size = parse_value(key, value)?,
            "channel_codec.shared_decoder" => self.channel_codec.shared_decoder = parse_bool(key, value)?,
            "fusion.tau" => p.fusion = FusionConfig::new(parse_value(key, value)?)?,
            "ranking.mode" => p.ranking_mode = value.parse()?,
            "ranking.epsilon" => p.epsilon = parse_value(key, value)?,
            "ranking.file" => self.ranking_file = value.into(),
            "pipeline.ratio" => p.ratio = parse_value(key, value)?,
            "pipeline.normalization" => p.normalization = parse_bool(key, value)?,
            "basis.u1" => p.basis = OrthoBasis::new_unchecked(parse_list(key, value)?, p.basis.u2().to_vec()),
            "basis.u2" => p.basis = OrthoBasis::new_unchecked(p.basis.u1().to_vec(), parse_list(key, value)?),
            "channel.mode" => p.channel_mode = value.parse()?,
            "channel.b0" => p.sr.b0 = parse_value(key, value)?,
            "channel.m" => p.sr.m_nak = parse_value(key, value)?,
            "channel.omega" => p.sr.omega = parse_value(key, value)?,
            "channel.equalize" => p.equalize = parse_bool(key, value)?,
            "train.batch_size" => p.batch_size = parse_value(key, value)?,
            "train.epochs" => p.epochs = parse_value(key, value)?,
            "train.learning_rate" => p.learning_rate = parse_value(key, value)?,
            "train.user1_snr" => p.user_snr[0] = parse_snr_range(key, value)?,
            "train.user2_snr" => p.user_snr[1] = parse_snr_range(key, value)?,
            "train.combiner" => p.combiner = value.parse()?,
            "sweep.snr" => {
                parse_grid(value, true)?;
                self.sweep.snr = value.into()
            }
            "sweep.ratio" => {
                parse_grid(value, false)?;
                self.sweep.ratio = value.into()
            }
            "sweep.sorting" => {
                parse_sortings(value)?;
                self.sweep.sorting = value.into()
            }
            "sweep.normalization" => {
                parse_normalizations(value)?;
                self.sweep.normalization = value.into()
            }
            "sweep.seeds" => self.sweep.seeds = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.semantic_config(1, 1, 1)?;
        self.channel_codec.validate()?;
        self.pipeline.validate()?;
        OrthoBasis::new(self.pipeline.basis.u1().to_vec(), self.pipeline.basis.u2().to_vec())?;
        if self.semantic_train.batch_size == 0 {
            return Err(Error::Config("semantic.batch_size must be > 0".into()));
        }
        if !(self.semantic_train.learning_rate > 0.0) {
            return Err(Error::Config("semantic.learning_rate must be > 0".into()));
        }
        if self.sweep.seeds == 0 {
            return Err(Error::Config("sweep.seeds must be >= 1".into()));
        }
        Ok(())
    }

    /// Semantic codec shape for images of the given size.
    pub fn semantic_config(&self, height: usize, width: usize, channels: usize) -> Result<SemanticCodecConfig> {
        let cfg = SemanticCodecConfig {
            hidden: self.semantic_hidden,
            dim: self.semantic_dim,
            ..SemanticCodecConfig::new(height, width, channels)
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sr_params(&self) -> SrParams {
        self.pipeline.sr
    }

    /// Every effective value, one `key = value` per line, in a form that
    /// parses back to an equal config.
    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("run.seed", self.seed.to_string());
        kv("data.dir", self.data_dir.display().to_string());
        kv("data.eval_dir", self.eval_dir.display().to_string());
        kv("semantic.hidden", self.semantic_hidden.to_string());
        kv("semantic.dim", self.semantic_dim.to_string());
        kv("semantic.epochs", self.semantic_train.epochs.to_string());
        kv("semantic.batch_size", self.semantic_train.batch_size.to_string());
        kv("semantic.learning_rate", self.semantic_train.learning_rate.to_string());
        kv("semantic.standardize", self.semantic_standardize.to_string());
        kv("channel_codec.kernel_size", self.channel_codec.kernel_size.to_string());
        kv("channel_codec.shared_decoder", self.channel_codec.shared_decoder.to_string());
        kv("fusion.tau", p.fusion.tau.to_string());
        kv("ranking.mode", p.ranking_mode.to_string());
        kv("ranking.epsilon", p.epsilon.to_string());
        kv("ranking.file", self.ranking_file.display().to_string());
        kv("pipeline.ratio", p.ratio.to_string());
        kv("pipeline.normalization", p.normalization.to_string());
        kv("basis.u1", join(p.basis.u1()));
        kv("basis.u2", join(p.basis.u2()));
        kv("channel.mode", p.channel_mode.to_string());
        kv("channel.b0", p.sr.b0.to_string());
        kv("channel.m", p.sr.m_nak.to_string());
        kv("channel.omega", p.sr.omega.to_string());
        kv("channel.equalize", p.equalize.to_string());
        kv("train.batch_size", p.batch_size.to_string());
        kv("train.epochs", p.epochs.to_string());
        kv("train.learning_rate", p.learning_rate.to_string());
        kv("train.user1_snr", format!("{}:{}", p.user_snr[0].lo, p.user_snr[0].hi));
        kv("train.user2_snr", format!("{}:{}", p.user_snr[1].lo, p.user_snr[1].hi));
        kv("train.combiner", p.combiner.to_string());
        kv("sweep.snr", self.sweep.snr.clone());
        kv("sweep.ratio", self.sweep.ratio.clone());
        kv("sweep.sorting", self.sweep.sorting.clone());
        kv("sweep.normalization", self.sweep.normalization.clone());
        kv("sweep.seeds", self.sweep.seeds.to_string());
        s
    }
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::Usage(m) => m.clone(),
        other => other.to_string(),
    }
}

fn usage_token(token: &str, why: &str) -> Error {
    Error::Usage(format!("malformed range token {token:?}: {why}"))
}

/// Parses a comma-separated list of numbers and `a:b:step` ranges
/// (inclusive). `inf` is accepted when `allow_inf` is set.
pub fn parse_grid(text: &str, allow_inf: bool) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for token in text.split(',').map(str::trim) {
        if token.is_empty() {
            return Err(usage_token(token, "empty entry"));
        }
        if allow_inf && token == "inf" {
            out.push(f64::INFINITY);
            continue;
        }
        let parts: Vec<&str> = token.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| usage_token(token, "not a finite number"))
        };
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || b < a {
                    return Err(usage_token(token, "need a <= b and step > 0"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize + 1;
                if count > 100_000 {
                    return Err(usage_token(token, "too many grid points"));
                }
                out.extend((0..count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12));
            }
            _ => return Err(usage_token(token, "expected a number or a:b:step")),
        }
    }
    Ok(out)
}

pub fn parse_sortings(text: &str) -> Result<Vec<SortingKind>> {
    text.split(',').map(|t| t.trim().parse()).collect()
}

pub fn parse_normalizations(text: &str) -> Result<Vec<bool>> {
    text.split(',')
        .map(|t| match t.trim() {
            "on" => Ok(true),
            "off" => Ok(false),
            other => Err(Error::Usage(format!("unknown normalization {other:?} (expected on|off)"))),
        })
        .collect()
}
