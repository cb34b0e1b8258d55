//! Reconstruction-sensitivity ranking and bandwidth cropping.
//!
//! Each feature dimension is scored by how much the reconstruction loss
//! grows when that dimension alone is pushed up by `epsilon`. Dimensions are
//! sorted by descending score; a bandwidth ratio `r` keeps the first
//! `floor(r * d)` sorted entries, and the receiver zero-fills the rest and
//! undoes the permutation.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nnkit::mse;
use crate::rng;

/// Anything that maps a feature vector to a reconstruction.
pub trait FeatureDecoder {
    fn decode_features(&self, features: &[f64]) -> Result<Vec<f64>>;
}

/// Anything that maps a source sample to a feature vector.
pub trait FeatureEncoder {
    fn encode_features(&self, source: &[f64]) -> Result<Vec<f64>>;
}

impl<D: FeatureDecoder + ?Sized> FeatureDecoder for &D {
    fn decode_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        (**self).decode_features(features)
    }
}

/// Wraps a decoder and counts its evaluations.
#[derive(Debug)]
pub struct CountingDecoder<D> {
    inner: D,
    calls: AtomicUsize,
}

impl<D> CountingDecoder<D> {
    pub fn new(inner: D) -> Self {
        CountingDecoder {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<D: FeatureDecoder> FeatureDecoder for CountingDecoder<D> {
    fn decode_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.decode_features(features)
    }
}

/// A permutation of `0..d`; entry `k` is the original index placed at
/// sorted position `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Data(format!("not a permutation of 0..{}: index {i}", order.len())));
            }
        }
        Ok(Permutation(order))
    }

    pub fn identity(d: usize) -> Self {
        Permutation((0..d).collect())
    }

    /// Uniformly random permutation drawn from `seed`.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut rng::stream(seed));
        Permutation(order)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingMode {
    /// One static permutation, averaged offline over a calibration set.
    Calibrated,
    /// Recomputed for each image pair and sent in the frame header.
    PerFrame,
}

impl std::str::FromStr for RankingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calibrated" => Ok(RankingMode::Calibrated),
            "per_frame" => Ok(RankingMode::PerFrame),
            _ => Err(Error::Config(format!("unknown ranking mode {s:?} (calibrated|per_frame)"))),
        }
    }
}

impl std::fmt::Display for RankingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RankingMode::Calibrated => "calibrated",
            RankingMode::PerFrame => "per_frame",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRanking {
    pub scores: Vec<f64>,
    pub perm: Permutation,
    pub epsilon: f64,
    pub source: RankingMode,
}

/// Loss increase per dimension under a `+epsilon` perturbation, using MSE
/// against `target`. Performs exactly `d + 1` decoder evaluations.
pub fn sensitivity_scores<D: FeatureDecoder + ?Sized>(
    features: &[f64],
    decoder: &D,
    target: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::Usage(format!("perturbation epsilon must be > 0, got {epsilon}")));
    }
    let base = decoder.decode_features(features)?;
    if base.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite reconstruction of unperturbed features".into()));
    }
    let base_loss = mse(target, &base)?;
    let mut probe = features.to_vec();
    let mut scores = Vec::with_capacity(features.len());
    for i in 0..features.len() {
        probe[i] = features[i] + epsilon;
        let out = decoder.decode_features(&probe)?;
        probe[i] = features[i];
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite reconstruction when perturbing dimension {i}")));
        }
        scores.push(mse(target, &out)? - base_loss);
    }
    Ok(scores)
}

/// Descending stable sort; ties keep ascending original index.
pub fn rank(scores: &[f64]) -> Result<Permutation> {
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("non-finite sensitivity score at dimension {i}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    Ok(Permutation(order))
}

/// Bandwidth budget: ratio `r`, preserved count `K = floor(r * d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub ratio: f64,
    pub dim: usize,
    pub kept: usize,
}

impl CropSpec {
    pub fn new(ratio: f64, dim: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Usage(format!("bandwidth ratio must be in (0, 1], got {ratio}")));
        }
        let kept = (ratio * dim as f64).floor() as usize;
        if kept == 0 {
            return Err(Error::Usage(format!("ratio preserves zero dimensions (r={ratio}, d={dim})")));
        }
        Ok(CropSpec { ratio, dim, kept })
    }

    /// Positional mask over the sorted vector: ones on the first `K` slots.
    pub fn mask(&self) -> Vec<u8> {
        (0..self.dim).map(|i| u8::from(i < self.kept)).collect()
    }
}

/// Reorders `features` by `perm` and keeps the first `K` entries.
pub fn crop(features: &[f64], perm: &Permutation, ratio: f64) -> Result<(Vec<f64>, CropSpec)> {
    if perm.len() != features.len() {
        return Err(Error::shape("crop permutation length", features.len(), perm.len()));
    }
    let spec = CropSpec::new(ratio, features.len())?;
    let payload = perm.0[..spec.kept].iter().map(|&i| features[i]).collect();
    Ok((payload, spec))
}

/// Zero-pads a cropped payload back to `dim` and undoes the permutation.
pub fn restore(payload: &[f64], perm: &Permutation, dim: usize) -> Result<Vec<f64>> {
    if perm.len() != dim {
        return Err(Error::shape("restore permutation length", dim, perm.len()));
    }
    if payload.is_empty() {
        return Err(Error::Usage("cannot restore an empty payload".into()));
    }
    if payload.len() > dim {
        return Err(Error::shape("restore payload length (at most d)", dim, payload.len()));
    }
    let mut out = vec![0.0; dim];
    for (&v, &i) in payload.iter().zip(&perm.0) {
        out[i] = v;
    }
    Ok(out)
}

/// Ranks dimensions by sensitivity averaged over a calibration set.
pub fn calibrate_ranking<T, E, D>(dataset: &[T], encoder: &E, decoder: &D, epsilon: f64) -> Result<SensitivityRanking>
where
    T: AsRef<[f64]>,
    E: FeatureEncoder + ?Sized,
    D: FeatureDecoder + ?Sized,
{
    if dataset.is_empty() {
        return Err(Error::Data("calibration set is empty".into()));
    }
    let mut sum: Vec<f64> = Vec::new();
    for item in dataset {
        let f = encoder.encode_features(item.as_ref())?;
        let s = sensitivity_scores(&f, decoder, item.as_ref(), epsilon)?;
        if sum.is_empty() {
            sum = s;
        } else {
            if s.len() != sum.len() {
                return Err(Error::shape("calibration feature dimension", sum.len(), s.len()));
            }
            sum.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        }
    }
    let n = dataset.len() as f64;
    let scores: Vec<f64> = sum.into_iter().map(|v| v / n).collect();
    let perm = rank(&scores)?;
    Ok(SensitivityRanking {
        scores,
        perm,
        epsilon,
        source: RankingMode::Calibrated,
    })
}

fn ranking_body(perm: &Permutation, epsilon: f64) -> String {
    let mut s = format!("d={}\n", perm.len());
    let line: Vec<String> = perm.0.iter().map(|i| i.to_string()).collect();
    s.push_str(&line.join(" "));
    s.push('\n');
    writeln!(s, "epsilon={epsilon}").unwrap();
    s
}

/// Text form: `d=<int>`, permutation line, `epsilon=<float>`, and a
/// `crc32=<hex>` line over the first three lines (newlines included).
pub fn encode_ranking(perm: &Permutation, epsilon: f64) -> String {
    let mut s = ranking_body(perm, epsilon);
    writeln!(s, "crc32={:08x}", crc32fast::hash(s.as_bytes())).unwrap();
    s
}

pub fn decode_ranking(text: &str) -> Result<(Permutation, f64)> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() != 4 {
        return Err(Error::Data(format!("ranking file must have 4 lines, found {}", lines.len())));
    }
    let d: usize = lines[0]
        .strip_prefix("d=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Data(format!("bad dimension line {:?}", lines[0])))?;
    let order = lines[1]
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Data(format!("bad permutation entry {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if order.len() != d {
        return Err(Error::shape("ranking permutation length", d, order.len()));
    }
    let epsilon: f64 = lines[2]
        .strip_prefix("epsilon=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Data(format!("bad epsilon line {:?}", lines[2])))?;
    let crc = lines[3]
        .strip_prefix("crc32=")
        .and_then(|v| u32::from_str_radix(v, 16).ok())
        .ok_or_else(|| Error::Data(format!("bad checksum line {:?}", lines[3])))?;
    let body = format!("{}\n{}\n{}\n", lines[0], lines[1], lines[2]);
    let actual = crc32fast::hash(body.as_bytes());
    if actual != crc {
        return Err(Error::Data(format!("ranking checksum mismatch: file {crc:08x}, computed {actual:08x}")));
    }
    Ok((Permutation::new(order)?, epsilon))
}

pub fn write_ranking_file(path: &Path, perm: &Permutation, epsilon: f64) -> Result<()> {
    std::fs::write(path, encode_ranking(perm, epsilon)).map_err(|e| Error::io(path, e))
}

pub fn read_ranking_file(path: &Path) -> Result<(Permutation, f64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_ranking(&text)
}
