//! Kronecker orthogonal embedding.
//!
//! The shared stream is spread on signature `u1` and the difference stream
//! on `u2` (`F ⊗ u`, one length-`q` block per feature). Because
//! `⟨a ⊗ u1, b ⊗ u2⟩ = (aᵀb)(u1ᵀu2) = 0`, the superposition separates
//! exactly by projecting each block back onto `u1` or `u2`.

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;
const MIN_NORM_SCALE: f64 = 1e-12;

/// Two orthonormal signature vectors of length `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthoBasis {
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl Default for OrthoBasis {
    fn default() -> Self {
        OrthoBasis {
            u1: vec![0.5, -0.5, 0.5, -0.5],
            u2: vec![0.5, 0.5, -0.5, -0.5],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl OrthoBasis {
    pub fn new(u1: Vec<f64>, u2: Vec<f64>) -> Result<Self> {
        if u1.is_empty() || u1.len() != u2.len() {
            return Err(Error::Config(format!(
                "basis vectors must be nonempty and equal length ({} vs {})",
                u1.len(),
                u2.len()
            )));
        }
        let cross = dot(&u1, &u2);
        if cross.abs() > ORTHO_TOL {
            return Err(Error::Config(format!("basis vectors not orthogonal: u1·u2 = {cross:e}")));
        }
        for (name, u) in [("u1", &u1), ("u2", &u2)] {
            let norm = dot(u, u).sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::Config(format!("{name} must have unit norm, got {norm}")));
            }
        }
        Ok(OrthoBasis { u1, u2 })
    }

    /// Skips validation; callers must check with [`OrthoBasis::new`]
    /// before use.
    pub(crate) fn new_unchecked(u1: Vec<f64>, u2: Vec<f64>) -> Self {
        OrthoBasis { u1, u2 }
    }

    pub fn q(&self) -> usize {
        self.u1.len()
    }

    pub fn u1(&self) -> &[f64] {
        &self.u1
    }

    pub fn u2(&self) -> &[f64] {
        &self.u2
    }

    /// Signature for a stream: 0 shared (`u1`), 1 difference (`u2`).
    pub fn signature(&self, stream: usize) -> &[f64] {
        if stream == 0 {
            &self.u1
        } else {
            &self.u2
        }
    }

    /// Embeds both streams, superposes them and power-normalizes.
    pub fn mix(&self, shared_emb: &[f64], delta_emb: &[f64], normalize: bool) -> Result<MixedFrame> {
        if shared_emb.len() != delta_emb.len() {
            return Err(Error::shape("mix stream lengths", shared_emb.len(), delta_emb.len()));
        }
        if shared_emb.len() % self.q() != 0 {
            return Err(Error::Data(format!(
                "embedded length {} not a multiple of q={}",
                shared_emb.len(),
                self.q()
            )));
        }
        debug_assert!({
            let scale = dot(shared_emb, shared_emb).sqrt() * dot(delta_emb, delta_emb).sqrt();
            dot(shared_emb, delta_emb).abs() <= 1e-9 * scale.max(1.0)
        });
        let sum: Vec<f64> = shared_emb.iter().zip(delta_emb).map(|(a, b)| a + b).collect();
        let norm_scale = if normalize && !sum.is_empty() {
            (sum.iter().map(|v| v * v).sum::<f64>() / sum.len() as f64).sqrt().max(MIN_NORM_SCALE)
        } else {
            1.0
        };
        Ok(MixedFrame {
            kept: sum.len() / self.q(),
            payload: sum.into_iter().map(|v| v / norm_scale).collect(),
            norm_scale,
        })
    }

    /// Embeds already-sorted streams of equal length and mixes them.
    pub fn embed_and_mix(&self, shared: &[f64], delta: &[f64], normalize: bool) -> Result<MixedFrame> {
        self.mix(&embed(shared, &self.u1), &embed(delta, &self.u2), normalize)
    }
}

/// Power-normalized superposition of the two embedded streams.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedFrame {
    pub payload: Vec<f64>,
    pub norm_scale: f64,
    /// Features per stream.
    pub kept: usize,
}

/// Kronecker product `features ⊗ u`.
pub fn embed(features: &[f64], u: &[f64]) -> Vec<f64> {
    features.iter().flat_map(|&f| u.iter().map(move |&v| f * v)).collect()
}

/// De-normalizes by `norm_scale` and projects each length-`q` block on `u`.
pub fn separate_payload(payload: &[f64], norm_scale: f64, u: &[f64]) -> Result<Vec<f64>> {
    if u.is_empty() || payload.len() % u.len() != 0 {
        return Err(Error::Data(format!(
            "payload length {} not divisible by q={}",
            payload.len(),
            u.len()
        )));
    }
    Ok(payload.chunks_exact(u.len()).map(|block| norm_scale * dot(block, u)).collect())
}

pub fn separate(frame: &MixedFrame, u: &[f64]) -> Result<Vec<f64>> {
    separate_payload(&frame.payload, frame.norm_scale, u)
}

/// `|⟨shared ⊗ u1, delta ⊗ u2⟩|`.
pub fn verify_lemma1(shared: &[f64], delta: &[f64], u1: &[f64], u2: &[f64]) -> f64 {
    dot(&embed(shared, u1), &embed(delta, u2)).abs()
}
