//! Evaluation grids.

use std::fmt::Write as _;

use super::{deliver, receive, transmit, Models, PipelineConfig, Sorting, SortingKind};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::media::{format_psnr, psnr_from_mse, ssim, ImageTensor, MetricConfig};
use crate::nnkit::mse;
use crate::rng;

pub const CSV_HEADER: &str = "snr_db,ratio,seed,user,sorting,normalization,mse,psnr_db,ssim";

/// Full-factorial evaluation grid. An SNR of `+inf` means an ideal link.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub snr_db: Vec<f64>,
    pub ratios: Vec<f64>,
    pub seeds: usize,
    pub sortings: Vec<SortingKind>,
    pub normalizations: Vec<bool>,
    pub base_seed: u64,
}

/// Per-user metrics at one grid point and seed, averaged over the pairs.
/// `mse` is on the `[0, 1]` sample scale; PSNR is computed from it on the
/// 8-bit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub snr_db: f64,
    pub ratio: f64,
    pub seed: usize,
    pub user: usize,
    pub sorting: SortingKind,
    pub normalization: bool,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

pub fn evaluate_sweep(
    cfg: &PipelineConfig,
    models: &Models,
    pairs: &[(ImageTensor, ImageTensor)],
    grid: &SweepGrid,
) -> Result<Vec<SweepRecord>> {
    if pairs.is_empty() {
        return Err(Error::Data("evaluation set is empty".into()));
    }
    if grid.seeds == 0 || grid.snr_db.is_empty() || grid.ratios.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    if grid.sortings.is_empty() || grid.normalizations.is_empty() {
        return Err(Error::Usage("sweep needs at least one sorting and normalization mode".into()));
    }
    let metric = MetricConfig::default();
    let mut records = Vec::new();
    for &sorting in &grid.sortings {
        for &normalization in &grid.normalizations {
            for (si, &snr) in grid.snr_db.iter().enumerate() {
                for (ri, &ratio) in grid.ratios.iter().enumerate() {
                    for seed in 0..grid.seeds {
                        let point = PipelineConfig {
                            ratio,
                            normalization,
                            sorting: match sorting {
                                SortingKind::Sensitivity => Sorting::Sensitivity,
                                SortingKind::Random => Sorting::Random {
                                    seed: rng::derive_seed(grid.base_seed, &[rng::label("perm"), seed as u64]),
                                },
                            },
                            ..cfg.clone()
                        };
                        let mut acc = [[0.0f64; 2]; 2];
                        for (p, (a, b)) in pairs.iter().enumerate() {
                            let frame = transmit(a, b, &point, models)?;
                            for (u, src) in [a, b].into_iter().enumerate() {
                                let link = if snr == f64::INFINITY {
                                    ChannelRealization::ideal()
                                } else {
                                    let coords = [rng::label("link"), si as u64, ri as u64, seed as u64, p as u64, u as u64];
                                    let s = rng::derive_seed(grid.base_seed, &coords);
                                    ChannelRealization::draw(point.channel_mode, &point.sr, snr, s)?
                                };
                                let rx = deliver(&frame, &link, point.equalize)?;
                                let image = receive(&rx, u + 1, &point, models)?;
                                acc[u][0] += mse(image.samples(), src.clamped().samples())?;
                                acc[u][1] += ssim(&image, src, &metric)?;
                            }
                        }
                        let n = pairs.len() as f64;
                        for (u, [m, s]) in acc.into_iter().enumerate() {
                            let m = m / n;
                            records.push(SweepRecord {
                                snr_db: snr,
                                ratio,
                                seed,
                                user: u + 1,
                                sorting,
                                normalization,
                                mse: m,
                                psnr_db: psnr_from_mse(m * 255.0 * 255.0, metric.psnr_max),
                                ssim: s / n,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(records)
}

fn fmt_snr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.10},{},{:.6}",
            fmt_snr(r.snr_db),
            r.ratio,
            r.seed,
            r.user,
            r.sorting,
            if r.normalization { "on" } else { "off" },
            r.mse,
            format_psnr(r.psnr_db),
            r.ssim
        )
        .unwrap();
    }
    out
}
