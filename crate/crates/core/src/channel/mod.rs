//! Shadowed-Rician fading and additive noise.
//!
//! The fading law is parameterized by the scatter power `b0`, the Nakagami
//! shadowing parameter `m` and the line-of-sight power `Ω`. Samples are
//! power gains `r = |A + Z|²`; a transmitted sequence is scaled by `sqrt(r)`
//! and receives white Gaussian noise of variance `10^(-γ/10)`.

mod special;

pub use special::{adaptive_simpson, hyp1f1};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Shadowed-Rician parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrParams {
    pub b0: f64,
    pub m_nak: f64,
    pub omega: f64,
}

impl Default for SrParams {
    fn default() -> Self {
        SrParams {
            b0: 0.158,
            m_nak: 19.4,
            omega: 1.29,
        }
    }
}

impl SrParams {
    pub fn new(b0: f64, m_nak: f64, omega: f64) -> Result<Self> {
        let p = SrParams { b0, m_nak, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(Error::Config(format!("b0 must be > 0, got {}", self.b0)));
        }
        if !(self.m_nak > 0.0 && self.m_nak.is_finite()) {
            return Err(Error::Config(format!("m must be > 0, got {}", self.m_nak)));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("omega must be >= 0, got {}", self.omega)));
        }
        Ok(())
    }

    /// `E[r] = 2 b0 + Ω`.
    pub fn mean_power(&self) -> f64 {
        2.0 * self.b0 + self.omega
    }

    /// Upper integration limit beyond which the density is negligible.
    fn tail_limit(&self) -> f64 {
        let decay = self.m_nak / (2.0 * self.b0 * self.m_nak + self.omega);
        self.mean_power() + 60.0 / decay
    }
}

/// Density of the power gain at `r ≥ 0`.
pub fn sr_pdf(r: f64, p: &SrParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Usage(format!("sr_pdf: r must be >= 0, got {r}")));
    }
    let two_b0 = 2.0 * p.b0;
    let denom = two_b0 * p.m_nak + p.omega;
    let log_front = p.m_nak * (two_b0 * p.m_nak / denom).ln() - two_b0.ln() - r / two_b0;
    let x = p.omega * r / (two_b0 * denom);
    Ok(log_front.exp() * hyp1f1(p.m_nak, 1.0, x)?)
}

/// Cumulative distribution built from quadrature of [`sr_pdf`] on a grid.
#[derive(Debug, Clone)]
pub struct SrCdf {
    params: SrParams,
    step: f64,
    cumulative: Vec<f64>,
}

impl SrCdf {
    pub fn new(params: SrParams) -> Result<Self> {
        params.validate()?;
        let upper = params.tail_limit();
        let cells = 4000usize;
        let step = upper / cells as f64;
        let pdf = |r: f64| sr_pdf(r, &params);
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            acc += adaptive_simpson(&pdf, i as f64 * step, (i + 1) as f64 * step, 1e-13)?;
            cumulative.push(acc);
        }
        Ok(SrCdf {
            params,
            step,
            cumulative,
        })
    }

    /// Total mass captured by the grid.
    pub fn total(&self) -> f64 {
        *self.cumulative.last().expect("nonempty grid")
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        let cell = (r / self.step).floor() as usize;
        if cell + 1 >= self.cumulative.len() {
            return Ok(self.total().min(1.0));
        }
        let a = cell as f64 * self.step;
        if r == a {
            return Ok(self.cumulative[cell]);
        }
        let f = |x: f64| sr_pdf(x, &self.params);
        let part = (r - a) / 6.0 * (f(a)? + 4.0 * f(0.5 * (a + r))? + f(r)?);
        Ok(self.cumulative[cell] + part)
    }
}

/// Draws one power gain `|sqrt(G) + Z|²` with `G ~ Gamma(m, Ω/m)` and
/// `Z` circular Gaussian with `E|Z|² = 2 b0`.
pub fn sr_draw<R: Rng + ?Sized>(p: &SrParams, rng: &mut R) -> f64 {
    let los = if p.omega > 0.0 {
        Gamma::new(p.m_nak, p.omega / p.m_nak).expect("validated gamma parameters").sample(rng)
    } else {
        0.0
    };
    let sd = p.b0.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    let a = los.sqrt() + sd * re;
    let b = sd * im;
    a * a + b * b
}

/// `n` independent power gains from one seeded stream.
pub fn sr_sample(n: usize, p: &SrParams, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Usage("sample count must be >= 1".into()));
    }
    p.validate()?;
    let mut r = rng::stream(seed);
    Ok((0..n).map(|_| sr_draw(p, &mut r)).collect())
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if samples.is_empty() {
        return Err(Error::Usage("KS statistic needs at least one sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let c = cdf(x)?;
        worst = worst.max(c - i as f64 / n).max((i + 1) as f64 / n - c);
    }
    Ok(worst)
}

/// Asymptotic KS critical value at significance 0.01.
pub fn ks_critical_001(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelMode {
    SrFading,
    AwgnOnly,
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sr_fading" => Ok(ChannelMode::SrFading),
            "awgn_only" => Ok(ChannelMode::AwgnOnly),
            _ => Err(Error::Config(format!("unknown channel mode {s:?} (expected sr_fading|awgn_only)"))),
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelMode::SrFading => "sr_fading",
            ChannelMode::AwgnOnly => "awgn_only",
        })
    }
}

/// `σ² = 10^(-γ/10)` against unit transmit power; zero at `γ = +∞`.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// One user's link for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub mode: ChannelMode,
    pub snr_db: f64,
    pub gain: f64,
    pub noise_var: f64,
    pub seed: u64,
}

impl ChannelRealization {
    /// Draws the block-fading gain from `seed`; the noise for
    /// [`apply_channel`] comes from a separate substream of the same seed.
    pub fn draw(mode: ChannelMode, params: &SrParams, snr_db: f64, seed: u64) -> Result<Self> {
        if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
            return Err(Error::Usage(format!("invalid SNR {snr_db} dB")));
        }
        let gain = match mode {
            ChannelMode::AwgnOnly => 1.0,
            ChannelMode::SrFading => {
                params.validate()?;
                sr_draw(params, &mut rng::substream(seed, &[0])).max(f64::MIN_POSITIVE)
            }
        };
        Ok(ChannelRealization {
            mode,
            snr_db,
            gain,
            noise_var: noise_variance(snr_db),
            seed,
        })
    }

    /// Noise-free, unit-gain link.
    pub fn ideal() -> Self {
        ChannelRealization {
            mode: ChannelMode::AwgnOnly,
            snr_db: f64::INFINITY,
            gain: 1.0,
            noise_var: 0.0,
            seed: 0,
        }
    }

    fn noise_stream(&self) -> StreamRng {
        rng::substream(self.seed, &[1])
    }
}

/// `sqrt(gain) · y + n` with `n ~ N(0, σ²)` i.i.d.
pub fn apply_channel(y: &[f64], real: &ChannelRealization) -> Result<Vec<f64>> {
    if y.is_empty() {
        return Err(Error::Usage("cannot transmit an empty sequence".into()));
    }
    let amp = real.gain.sqrt();
    if real.noise_var == 0.0 {
        return Ok(y.iter().map(|v| amp * v).collect());
    }
    let sd = real.noise_var.sqrt();
    let mut r = real.noise_stream();
    Ok(y
        .iter()
        .map(|v| {
            let n: f64 = StandardNormal.sample(&mut r);
            amp * v + sd * n
        })
        .collect())
}

/// Genie channel-state equalization: divides by `sqrt(gain)`.
pub fn equalize(received: &mut [f64], real: &ChannelRealization) {
    let amp = real.gain.sqrt();
    received.iter_mut().for_each(|v| *v /= amp);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_limit() {
        let p = SrParams::new(0.2, 3.0, 0.0).unwrap();
        assert!((sr_pdf(0.0, &p).unwrap() - 2.5).abs() < 1e-12);
        for r in [0.1, 0.7, 2.0] {
            let want = 2.5 * (-r / 0.4f64).exp();
            assert!((sr_pdf(r, &p).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_is_nonnegative_and_normalized() {
        let p = SrParams::default();
        for i in 0..200 {
            assert!(sr_pdf(i as f64 * 0.05, &p).unwrap() >= 0.0);
        }
        let cdf = SrCdf::new(p).unwrap();
        assert!((cdf.total() - 1.0).abs() < 1e-6);
        assert!(sr_pdf(-1.0, &p).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(SrParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SrParams::new(0.1, 0.0, 1.0).is_err());
        assert!(SrParams::new(0.1, 1.0, -0.1).is_err());
        assert!(sr_sample(0, &SrParams::default(), 1).is_err());
    }

    #[test]
    fn samples_are_deterministic() {
        let p = SrParams::default();
        assert_eq!(sr_sample(64, &p, 5).unwrap(), sr_sample(64, &p, 5).unwrap());
        assert_ne!(sr_sample(64, &p, 5).unwrap(), sr_sample(64, &p, 6).unwrap());
    }

    #[test]
    fn awgn_basics() {
        assert_eq!(noise_variance(0.0), 1.0);
        assert_eq!(noise_variance(f64::INFINITY), 0.0);
        let y = vec![0.3, -1.2, 0.8];
        let real = ChannelRealization::draw(ChannelMode::AwgnOnly, &SrParams::default(), f64::INFINITY, 9).unwrap();
        assert_eq!(apply_channel(&y, &real).unwrap(), y);
        assert!(apply_channel(&[], &real).is_err());
        let real = ChannelRealization::draw(ChannelMode::AwgnOnly, &SrParams::default(), 0.0, 9).unwrap();
        assert_eq!(real.noise_var, 1.0);
        assert_eq!(real.gain, 1.0);
    }

    #[test]
    fn equalize_undoes_gain() {
        let real = ChannelRealization::draw(ChannelMode::SrFading, &SrParams::default(), f64::INFINITY, 4).unwrap();
        let y = vec![1.0, -2.0, 0.5];
        let mut rx = apply_channel(&y, &real).unwrap();
        equalize(&mut rx, &real);
        for (a, b) in rx.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
