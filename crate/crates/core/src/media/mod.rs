//! Images, PGM/PPM files, synthetic correlated pairs and quality metrics.

mod metrics;
mod pnm;
mod synth;

pub use metrics::{format_psnr, psnr, psnr_from_mse, ssim, MetricConfig};
pub use pnm::{decode_pnm, encode_pnm, load_pnm, save_pnm};
pub use synth::{gen_pair, PairSpec};

use crate::error::{Error, Result};

/// Interleaved `H x W x C` samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    channels: usize,
    samples: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, samples: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Data(format!("channels must be 1 or 3, got {channels}")));
        }
        if height * width * channels != samples.len() {
            return Err(Error::shape("image samples", height * width * channels, samples.len()));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            samples,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn clamped(&self) -> ImageTensor {
        ImageTensor {
            samples: self.samples.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            ..*self
        }
    }

    pub(crate) fn same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Data(format!(
                "image shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

impl AsRef<[f64]> for ImageTensor {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}
