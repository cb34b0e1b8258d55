use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use smdma::channel::{
    adaptive_simpson, apply_channel, ks_critical_001, ks_statistic, sr_pdf, sr_sample, ChannelMode,
    ChannelRealization, SrCdf, SrParams,
};

const UPPER: f64 = 60.0;

#[test]
fn pdf_integrates_to_one_with_first_moment_2b0_plus_omega() {
    let p = SrParams::default();
    let mass = adaptive_simpson(&|r| sr_pdf(r, &p), 0.0, UPPER, 1e-12).unwrap();
    let moment = adaptive_simpson(&|r| Ok(r * sr_pdf(r, &p)?), 0.0, UPPER, 1e-12).unwrap();
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    assert!((moment - 1.606).abs() < 1e-4, "first moment {moment}");
    assert!((moment - (2.0 * p.b0 + p.omega)).abs() < 1e-6);
}

#[test]
fn sample_mean_and_ks_against_quadrature_cdf() {
    let p = SrParams::default();
    let n = 100_000;
    let s = sr_sample(n, &p, 2024).unwrap();
    let mean = s.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.606).abs() < 0.02, "mean {mean}");
    let cdf = SrCdf::new(p).unwrap();
    assert!((cdf.total() - 1.0).abs() < 1e-6);
    let ks = ks_statistic(&s, |r| cdf.eval(r)).unwrap();
    assert!(ks < ks_critical_001(n), "ks {ks} vs {}", ks_critical_001(n));
}

fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0f64);
    while term > 1e-17 * sum {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
    }
    sum
}

/// Power PDF of a Rician envelope with deterministic LOS power `omega` and
/// scatter variance `b0` per real dimension.
fn rician_pdf(r: f64, b0: f64, omega: f64) -> f64 {
    (-(r + omega) / (2.0 * b0)).exp() * bessel_i0((omega * r).sqrt() / b0) / (2.0 * b0)
}

#[test]
fn large_m_approaches_rician() {
    let p = SrParams::new(0.158, 1e6, 1.29).unwrap();
    for r in [0.2, 0.6, 1.0, 1.5, 2.5, 4.0] {
        let sr = sr_pdf(r, &p).unwrap();
        let rice = rician_pdf(r, p.b0, p.omega);
        assert!((sr - rice).abs() <= 1e-3 * rice, "r={r}: {sr} vs {rice}");
    }

    // CDF of the Rician oracle on a fine grid, cumulative Simpson
    let h = 1e-3;
    let cells = (UPPER / 4.0 / h) as usize;
    let mut table = vec![0.0; cells + 1];
    for i in 0..cells {
        let a = i as f64 * h;
        let f = |x| rician_pdf(x, p.b0, p.omega);
        table[i + 1] = table[i] + h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
    }
    let cdf = |r: f64| {
        let t = (r / h).min(cells as f64);
        let i = (t.floor() as usize).min(cells - 1);
        Ok(table[i] + (table[i + 1] - table[i]) * (t - i as f64))
    };
    let n = 20_000;
    let s = sr_sample(n, &p, 11).unwrap();
    let ks = ks_statistic(&s, cdf).unwrap();
    assert!(ks < ks_critical_001(n), "ks {ks}");
}

#[test]
fn vanishing_scatter_concentrates_at_omega() {
    let p = SrParams::new(1e-7, 1e5, 1.29).unwrap();
    let s = sr_sample(10_000, &p, 5).unwrap();
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!((mean - 1.29).abs() < 1e-2, "mean {mean}");
    assert!(var < 1e-3, "var {var}");
}

#[test]
fn awgn_empirical_snr_matches_configured() {
    let p = SrParams::default();
    for snr in [-10.0, 0.0, 7.5, 20.0] {
        let mut noise = 0.0;
        let mut count = 0usize;
        for frame in 0..1000u64 {
            let y: Vec<f64> = (0..64).map(|i| if (i + frame) % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let link = ChannelRealization::draw(ChannelMode::AwgnOnly, &p, snr, frame).unwrap();
            let rx = apply_channel(&y, &link).unwrap();
            noise += rx.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            count += y.len();
        }
        let measured = 10.0 * (count as f64 / noise).log10();
        assert!((measured - snr).abs() < 0.2, "configured {snr} dB, measured {measured} dB");
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent walk of the documented path: gain from the `[0]` child
/// stream, noise from the `[1]` child stream, both ChaCha8.
fn oracle_receive(y: &[f64], p: &SrParams, snr_db: f64, seed: u64) -> (f64, Vec<f64>) {
    let child = |c: u64| ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ splitmix64(c)));
    let mut g = child(0);
    let los = Gamma::new(p.m_nak, p.omega / p.m_nak).unwrap().sample(&mut g);
    let re: f64 = StandardNormal.sample(&mut g);
    let im: f64 = StandardNormal.sample(&mut g);
    let a = los.sqrt() + p.b0.sqrt() * re;
    let b = p.b0.sqrt() * im;
    let gain = a * a + b * b;
    let sd = 10f64.powf(-snr_db / 10.0).sqrt();
    let mut n = child(1);
    let rx = y
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut n);
            gain.sqrt() * v + sd * z
        })
        .collect();
    (gain, rx)
}

#[test]
fn received_frames_reproduced_by_independent_rng_walk() {
    let p = SrParams::default();
    let y: Vec<f64> = (0..32).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    for seed in [0u64, 1, 42, u64::MAX] {
        for snr in [-10.0, 3.0] {
            let link = ChannelRealization::draw(ChannelMode::SrFading, &p, snr, seed).unwrap();
            let rx = apply_channel(&y, &link).unwrap();
            let (gain, expect) = oracle_receive(&y, &p, snr, seed);
            assert_eq!(link.gain.to_bits(), gain.to_bits());
            assert_eq!(rx, expect);
        }
    }
}

#[test]
fn identical_seeds_give_identical_streams() {
    let p = SrParams::default();
    let a = sr_sample(1000, &p, 9).unwrap();
    let b = sr_sample(1000, &p, 9).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(a, sr_sample(1000, &p, 10).unwrap());
}
