//! Special functions and quadrature.

use crate::error::{Error, Result};

const SERIES_REL_TOL: f64 = 1e-15;
const SERIES_MAX_TERMS: usize = 10_000;

/// Kummer's confluent hypergeometric function `₁F₁(a; b; x)` for `x ≥ 0`,
/// by direct power series.
pub fn hyp1f1(a: f64, b: f64, x: f64) -> Result<f64> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::Usage(format!("hyp1f1: b={b} is a non-positive integer")));
    }
    if !(x >= 0.0) || !x.is_finite() || !a.is_finite() || !b.is_finite() {
        return Err(Error::Usage(format!("hyp1f1: arguments out of domain (a={a}, b={b}, x={x})")));
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..SERIES_MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * x / (kf + 1.0);
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Numeric(format!("hyp1f1({a}, {b}, {x}) overflowed after {} terms", k + 1)));
        }
        if term.abs() <= SERIES_REL_TOL * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Numeric(format!(
        "hyp1f1({a}, {b}, {x}) did not converge in {SERIES_MAX_TERMS} terms; partial value {sum:e}"
    )))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyp1f1_identities() {
        for m in [0.5, 1.0, 19.4, 1e6] {
            assert_eq!(hyp1f1(m, 1.0, 0.0).unwrap(), 1.0);
        }
        assert!((hyp1f1(1.0, 1.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-12);
        // (1 + x) e^x
        assert!((hyp1f1(2.0, 1.0, 1.0).unwrap() - 2.0 * 1f64.exp()).abs() < 1e-10);
        for x in [0.1, 2.5, 10.0] {
            let got = hyp1f1(2.0, 1.0, x).unwrap();
            let want = (1.0 + x) * x.exp();
            assert!((got - want).abs() < 1e-12 * want);
        }
        // a = b gives e^x for any b
        assert!((hyp1f1(3.5, 3.5, 4.0).unwrap() - 4f64.exp()).abs() < 1e-12 * 4f64.exp());
    }

    #[test]
    fn hyp1f1_domain() {
        assert!(hyp1f1(1.0, 0.0, 1.0).is_err());
        assert!(hyp1f1(1.0, -2.0, 1.0).is_err());
        assert!(hyp1f1(1.0, 1.0, -1.0).is_err());
        assert!(hyp1f1(1.0, 1.0, f64::NAN).is_err());
        assert!(matches!(hyp1f1(1.0, 1.0, 1e6), Err(Error::Numeric(_))));
    }

    #[test]
    fn simpson_polynomials_and_exp() {
        let cubic = |x: f64| Ok(x * x * x - 2.0 * x);
        assert!((adaptive_simpson(&cubic, 0.0, 2.0, 1e-12).unwrap() - 0.0).abs() < 1e-12);
        let e = |x: f64| Ok((-x).exp());
        assert!((adaptive_simpson(&e, 0.0, 40.0, 1e-12).unwrap() - (1.0 - (-40f64).exp())).abs() < 1e-9);
    }
}
