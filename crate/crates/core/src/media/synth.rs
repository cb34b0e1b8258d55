//! Synthetic correlated image pairs.
//!
//! `s1` is a smooth textured background with a few flat shapes. `s2` copies
//! `s1` and repaints a compact region of `round(edit_fraction * H * W)`
//! pixels with an independently drawn scene, so the two images share most
//! of their content. Every repainted pixel differs from `s1`.

use rand::Rng;

use super::ImageTensor;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSpec {
    /// Side length of the square images.
    pub size: usize,
    pub channels: usize,
    /// Fraction of the image area that differs between the two images.
    pub edit_fraction: f64,
    pub texture_seed: u64,
    pub shape_count: usize,
}

impl Default for PairSpec {
    fn default() -> Self {
        PairSpec {
            size: 32,
            channels: 1,
            edit_fraction: 0.25,
            texture_seed: 0,
            shape_count: 4,
        }
    }
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn render_scene<R: Rng>(spec: &PairSpec, r: &mut R) -> Vec<f64> {
    let n = spec.size;
    let nf = n as f64;
    let ch = spec.channels;
    let mut img = vec![0.0; n * n * ch];

    let base: Vec<f64> = (0..ch).map(|_| r.random_range(0.25..0.6)).collect();
    let gx = r.random_range(-0.2..0.2);
    let gy = r.random_range(-0.2..0.2);
    let fx = r.random_range(0.2..1.2);
    let fy = r.random_range(0.2..1.2);
    let phase = r.random_range(0.0..std::f64::consts::TAU);
    let amp = r.random_range(0.04..0.12);
    for y in 0..n {
        for x in 0..n {
            let t = amp * (fx * x as f64 + fy * y as f64 + phase).sin()
                + gx * (x as f64 / nf - 0.5)
                + gy * (y as f64 / nf - 0.5);
            for c in 0..ch {
                img[(y * n + x) * ch + c] = base[c] + t;
            }
        }
    }

    for _ in 0..spec.shape_count {
        let value: Vec<f64> = (0..ch).map(|_| r.random_range(0.0..1.0)).collect();
        let w = r.random_range(n / 6..=n / 2).max(2);
        let h = r.random_range(n / 6..=n / 2).max(2);
        let x0 = r.random_range(0..=n - w);
        let y0 = r.random_range(0..=n - h);
        let disc = r.random_bool(0.5);
        let (cx, cy) = (x0 as f64 + w as f64 / 2.0, y0 as f64 + h as f64 / 2.0);
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                if disc {
                    let dx = (x as f64 + 0.5 - cx) / (w as f64 / 2.0);
                    let dy = (y as f64 + 0.5 - cy) / (h as f64 / 2.0);
                    if dx * dx + dy * dy > 1.0 {
                        continue;
                    }
                }
                for c in 0..ch {
                    img[(y * n + x) * ch + c] = value[c];
                }
            }
        }
    }

    for v in &mut img {
        *v = quantize(*v + r.random_range(-2.0..=2.0) / 255.0);
    }
    img
}

/// Pixel indices (row-major) of the edited region for this draw.
fn edit_region<R: Rng>(n: usize, fraction: f64, r: &mut R) -> Vec<usize> {
    let count = (fraction * (n * n) as f64).round() as usize;
    if count == 0 {
        return Vec::new();
    }
    let w = ((count as f64).sqrt().ceil() as usize).clamp(1, n);
    let h = count.div_ceil(w);
    let x0 = r.random_range(0..=n - w);
    let y0 = r.random_range(0..=n - h);
    (0..count).map(|k| (y0 + k / w) * n + x0 + k % w).collect()
}

/// Generates a correlated pair; deterministic in `(spec, seed)`.
pub fn gen_pair(spec: &PairSpec, seed: u64) -> Result<(ImageTensor, ImageTensor)> {
    if spec.size < 8 {
        return Err(Error::Usage(format!("image size {} too small (minimum 8)", spec.size)));
    }
    if !(0.0..=1.0).contains(&spec.edit_fraction) {
        return Err(Error::Usage(format!("edit_fraction {} outside [0, 1]", spec.edit_fraction)));
    }
    if spec.channels != 1 && spec.channels != 3 {
        return Err(Error::Usage(format!("channels must be 1 or 3, got {}", spec.channels)));
    }
    let mut r = rng::substream(seed, &[spec.texture_seed, rng::label("scene")]);
    let s1 = render_scene(spec, &mut r);
    let mut s2 = s1.clone();

    let mut edit_rng = rng::substream(seed, &[spec.texture_seed, rng::label("edit")]);
    let region = edit_region(spec.size, spec.edit_fraction, &mut edit_rng);
    if !region.is_empty() {
        let other = render_scene(spec, &mut edit_rng);
        let ch = spec.channels;
        for p in region {
            for c in 0..ch {
                s2[p * ch + c] = other[p * ch + c];
            }
            if s2[p * ch] == s1[p * ch] {
                let old = s1[p * ch];
                s2[p * ch] = if old >= 0.5 { old - 1.0 / 255.0 } else { old + 1.0 / 255.0 };
            }
        }
    }
    let n = spec.size;
    Ok((
        ImageTensor::new(n, n, spec.channels, s1)?,
        ImageTensor::new(n, n, spec.channels, s2)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn differing_pixels(a: &ImageTensor, b: &ImageTensor) -> usize {
        let ch = a.channels();
        a.samples()
            .chunks(ch)
            .zip(b.samples().chunks(ch))
            .filter(|(x, y)| x != y)
            .count()
    }

    #[test]
    fn zero_edit_gives_identical_images() {
        let spec = PairSpec {
            edit_fraction: 0.0,
            ..Default::default()
        };
        let (a, b) = gen_pair(&spec, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_edit_changes_almost_every_pixel() {
        let spec = PairSpec {
            edit_fraction: 1.0,
            ..Default::default()
        };
        for seed in 0..10 {
            let (a, b) = gen_pair(&spec, seed).unwrap();
            let frac = differing_pixels(&a, &b) as f64 / (32.0 * 32.0);
            assert!(frac >= 0.9, "seed {seed}: {frac}");
        }
    }

    #[test]
    fn edited_area_tracks_fraction() {
        for &f in &[0.01, 0.1, 0.25, 0.5, 0.8] {
            for channels in [1, 3] {
                let spec = PairSpec {
                    edit_fraction: f,
                    channels,
                    ..Default::default()
                };
                let (a, b) = gen_pair(&spec, 17).unwrap();
                let target = f * 1024.0;
                let got = differing_pixels(&a, &b) as f64;
                assert!((got - target).abs() <= 0.1 * target, "f={f}: {got} vs {target}");
            }
        }
    }

    #[test]
    fn deterministic_and_quantized() {
        let spec = PairSpec::default();
        assert_eq!(gen_pair(&spec, 3).unwrap(), gen_pair(&spec, 3).unwrap());
        assert_ne!(gen_pair(&spec, 3).unwrap().0, gen_pair(&spec, 4).unwrap().0);
        let (a, _) = gen_pair(&spec, 3).unwrap();
        assert!(a.samples().iter().all(|v| (v * 255.0 - (v * 255.0).round()).abs() < 1e-9));
    }

    #[test]
    fn rejects_tiny_images() {
        let spec = PairSpec {
            size: 4,
            ..Default::default()
        };
        match gen_pair(&spec, 0) {
            Err(Error::Usage(msg)) => assert!(msg.contains("too small")),
            other => panic!("{other:?}"),
        }
    }
}
