//! PSNR and global-statistics SSIM on the 8-bit scale.
//!
//! Samples are clamped to `[0, 1]` and multiplied by 255 before either
//! metric is computed. SSIM uses one window covering the whole image per
//! channel (population statistics) and averages channels equally.

use super::ImageTensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    /// Dynamic range of pixel values.
    pub dynamic_range: f64,
    pub k1: f64,
    pub k2: f64,
    /// Peak value used by PSNR.
    pub psnr_max: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            dynamic_range: 255.0,
            k1: 0.01,
            k2: 0.03,
            psnr_max: 255.0,
        }
    }
}

impl MetricConfig {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

fn to_8bit(image: &ImageTensor) -> impl Iterator<Item = f64> + '_ {
    image.samples().iter().map(|v| v.clamp(0.0, 1.0) * 255.0)
}

/// `10 log10(max^2 / mse)`; `f64::INFINITY` when `mse == 0`.
pub fn psnr_from_mse(mse: f64, max: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (max * max / mse).log10()
    }
}

pub fn psnr(a: &ImageTensor, b: &ImageTensor, cfg: &MetricConfig) -> Result<f64> {
    a.same_shape(b)?;
    let n = a.samples().len() as f64;
    let mse = to_8bit(a).zip(to_8bit(b)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    Ok(psnr_from_mse(mse, cfg.psnr_max))
}

/// CSV rendering: `inf` for the infinity marker, four decimals otherwise.
pub fn format_psnr(db: f64) -> String {
    if db.is_infinite() && db > 0.0 {
        "inf".to_string()
    } else {
        format!("{db:.4}")
    }
}

pub fn ssim(a: &ImageTensor, b: &ImageTensor, cfg: &MetricConfig) -> Result<f64> {
    a.same_shape(b)?;
    if a.samples() == b.samples() {
        return Ok(1.0);
    }
    let channels = a.channels();
    let xa: Vec<f64> = to_8bit(a).collect();
    let xb: Vec<f64> = to_8bit(b).collect();
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let mut total = 0.0;
    for c in 0..channels {
        let pa: Vec<f64> = xa.iter().skip(c).step_by(channels).copied().collect();
        let pb: Vec<f64> = xb.iter().skip(c).step_by(channels).copied().collect();
        let n = pa.len() as f64;
        let mu_a = pa.iter().sum::<f64>() / n;
        let mu_b = pb.iter().sum::<f64>() / n;
        let var_a = pa.iter().map(|v| (v - mu_a) * (v - mu_a)).sum::<f64>() / n;
        let var_b = pb.iter().map(|v| (v - mu_b) * (v - mu_b)).sum::<f64>() / n;
        let cov = pa.iter().zip(&pb).map(|(x, y)| (x - mu_a) * (y - mu_b)).sum::<f64>() / n;
        total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
    }
    Ok(total / channels as f64)
}
