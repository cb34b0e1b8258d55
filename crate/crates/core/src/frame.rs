//! Frame wire format.
//!
//! ```text
//! "SMDMA-FR" | version u16 | d u32 | K u32 | q u16 | ranking mode u8 |
//!   [permutation u32 x d, when the mode carries one] | norm_scale f64 |
//!   payload f64 x (q * K)
//! ```
//!
//! Little-endian throughout. The header travels over an error-free side
//! channel; only the payload goes through the noisy link.

use crate::error::{Error, Result};
use crate::ranking::Permutation;

pub const FRAME_MAGIC: &[u8; 8] = b"SMDMA-FR";
pub const FRAME_VERSION: u16 = 1;

/// Which permutation the receiver must undo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameRanking {
    /// Offline static permutation; not carried.
    Calibrated = 0,
    /// Per-pair sensitivity permutation; carried.
    PerFrame = 1,
    /// Random-sorting ablation permutation; carried.
    Random = 2,
}

impl FrameRanking {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(FrameRanking::Calibrated),
            1 => Some(FrameRanking::PerFrame),
            2 => Some(FrameRanking::Random),
            _ => None,
        }
    }

    pub fn carries_permutation(self) -> bool {
        self != FrameRanking::Calibrated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameHeader {
    pub dim: usize,
    pub kept: usize,
    pub q: usize,
    pub ranking: FrameRanking,
    pub perm: Option<Permutation>,
    pub norm_scale: f64,
}

impl FrameHeader {
    pub fn payload_len(&self) -> usize {
        self.q * self.kept
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.kept == 0 || self.kept > self.dim {
            return Err(Error::Frame(format!("invalid K={} for d={}", self.kept, self.dim)));
        }
        if self.q == 0 {
            return Err(Error::Frame("q must be > 0".into()));
        }
        if !(self.norm_scale.is_finite() && self.norm_scale > 0.0) {
            return Err(Error::Frame(format!("invalid norm_scale {}", self.norm_scale)));
        }
        match (&self.perm, self.ranking.carries_permutation()) {
            (Some(p), true) if p.len() == self.dim => Ok(()),
            (Some(p), true) => Err(Error::Frame(format!("permutation length {} != d={}", p.len(), self.dim))),
            (None, false) => Ok(()),
            (None, true) => Err(Error::Frame("ranking mode requires a permutation".into())),
            (Some(_), false) => Err(Error::Frame("calibrated frames carry no permutation".into())),
        }
    }
}

/// A frame as delivered to a receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub header: FrameHeader,
    pub payload: Vec<f64>,
}

impl Frame {
    pub fn validate(&self) -> Result<()> {
        self.header.validate()?;
        if self.payload.len() != self.header.payload_len() {
            return Err(Error::Frame(format!(
                "payload has {} symbols, header says q*K = {}",
                self.payload.len(),
                self.header.payload_len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let h = &self.header;
        let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::Frame(format!("{v} exceeds u32")));
        let q = u16::try_from(h.q).map_err(|_| Error::Frame(format!("q={} exceeds u16", h.q)))?;
        let mut out = Vec::with_capacity(40 + 4 * h.dim + 8 * self.payload.len());
        out.extend_from_slice(FRAME_MAGIC);
        out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
        out.extend_from_slice(&to_u32(h.dim)?.to_le_bytes());
        out.extend_from_slice(&to_u32(h.kept)?.to_le_bytes());
        out.extend_from_slice(&q.to_le_bytes());
        out.push(h.ranking as u8);
        if let Some(p) = &h.perm {
            for &i in p.as_slice() {
                out.extend_from_slice(&to_u32(i)?.to_le_bytes());
            }
        }
        out.extend_from_slice(&h.norm_scale.to_le_bytes());
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Frame> {
        let mut pos = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8]> {
            if buf.len() - pos < n {
                return Err(Error::Frame(format!("truncated frame reading {what} at byte {pos}")));
            }
            pos += n;
            Ok(&buf[pos - n..pos])
        };
        if take(8, "magic")? != FRAME_MAGIC {
            return Err(Error::Frame("bad frame magic".into()));
        }
        let version = u16::from_le_bytes(take(2, "version")?.try_into().unwrap());
        if version != FRAME_VERSION {
            return Err(Error::Frame(format!("unsupported frame version {version}")));
        }
        let dim = u32::from_le_bytes(take(4, "d")?.try_into().unwrap()) as usize;
        let kept = u32::from_le_bytes(take(4, "K")?.try_into().unwrap()) as usize;
        let q = u16::from_le_bytes(take(2, "q")?.try_into().unwrap()) as usize;
        let mode = take(1, "ranking mode")?[0];
        let ranking = FrameRanking::from_u8(mode).ok_or_else(|| Error::Frame(format!("unknown ranking mode {mode}")))?;
        let perm = if ranking.carries_permutation() {
            let raw = take(dim.checked_mul(4).ok_or_else(|| Error::Frame("d overflow".into()))?, "permutation")?;
            let order = raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize).collect();
            Some(Permutation::new(order).map_err(|e| Error::Frame(e.to_string()))?)
        } else {
            None
        };
        let norm_scale = f64::from_le_bytes(take(8, "norm_scale")?.try_into().unwrap());
        let header = FrameHeader {
            dim,
            kept,
            q,
            ranking,
            perm,
            norm_scale,
        };
        header.validate()?;
        let raw = take(header.payload_len() * 8, "payload")?;
        let payload = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if pos != buf.len() {
            return Err(Error::Frame(format!("{} trailing bytes after payload", buf.len() - pos)));
        }
        Ok(Frame { header, payload })
    }
}
