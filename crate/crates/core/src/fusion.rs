//! Shared / difference decomposition of two feature vectors.
//!
//! User 1's features are carried whole as the shared component `F_s`; the
//! difference `f2 - f1` is kept only where it exceeds the threshold
//! (strictly), so `F_s + Δ` reproduces `f2` to within `tau` per element.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub tau: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { tau: 0.05 }
    }
}

impl FusionConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(Error::Config(format!("fusion.tau must be >= 0, got {tau}")));
        }
        Ok(FusionConfig { tau })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionPair {
    pub shared: Vec<f64>,
    pub delta: Vec<f64>,
}

impl FusionPair {
    pub fn dim(&self) -> usize {
        self.shared.len()
    }
}

pub fn fuse(f1: &[f64], f2: &[f64], cfg: &FusionConfig) -> Result<FusionPair> {
    if f1.len() != f2.len() {
        return Err(Error::shape("fuse feature lengths", f1.len(), f2.len()));
    }
    let delta = f1
        .iter()
        .zip(f2)
        .map(|(a, b)| {
            let d = b - a;
            if d.abs() > cfg.tau {
                d
            } else {
                0.0
            }
        })
        .collect();
    Ok(FusionPair {
        shared: f1.to_vec(),
        delta,
    })
}

/// Receiver-side inverse: `(F_s, F_s + Δ)`.
pub fn defuse(pair: &FusionPair) -> (Vec<f64>, Vec<f64>) {
    let f2 = pair.shared.iter().zip(&pair.delta).map(|(s, d)| s + d).collect();
    (pair.shared.clone(), f2)
}
