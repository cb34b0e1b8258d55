//! Multi-user loss combination.

use crate::error::{Error, Result};

/// Guard on `L_i` in the geometric-mean gradient.
pub const LOSS_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    /// `(∏ L_i)^(1/M)`
    Geometric,
    /// `Σ L_i / M`
    Arithmetic,
}

impl std::str::FromStr for Combiner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Combiner::Geometric),
            "arithmetic" => Ok(Combiner::Arithmetic),
            _ => Err(Error::Config(format!("unknown combiner {s:?} (expected geometric|arithmetic)"))),
        }
    }
}

impl std::fmt::Display for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Combiner::Geometric => "geometric",
            Combiner::Arithmetic => "arithmetic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub losses: Vec<f64>,
    pub combined: f64,
    /// `∂L_all / ∂L_i`.
    pub grads: Vec<f64>,
}

impl LossReport {
    pub fn users(&self) -> usize {
        self.losses.len()
    }

    pub fn worst(&self) -> f64 {
        self.losses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn combined_loss(losses: &[f64], combiner: Combiner) -> Result<LossReport> {
    if losses.is_empty() {
        return Err(Error::Usage("at least one user loss is required".into()));
    }
    if let Some((i, l)) = losses.iter().enumerate().find(|(_, l)| !(**l >= 0.0)) {
        return Err(Error::Numeric(format!("user {} loss must be a non-negative number, got {l}", i + 1)));
    }
    let m = losses.len() as f64;
    let (combined, grads) = match combiner {
        Combiner::Geometric => {
            let combined = if losses.iter().any(|&l| l == 0.0) {
                0.0
            } else {
                (losses.iter().map(|l| l.ln()).sum::<f64>() / m).exp()
            };
            let grads = losses.iter().map(|&l| combined / (m * l.max(LOSS_GUARD))).collect();
            (combined, grads)
        }
        Combiner::Arithmetic => (losses.iter().sum::<f64>() / m, vec![1.0 / m; losses.len()]),
    };
    Ok(LossReport {
        losses: losses.to_vec(),
        combined,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let r = combined_loss(&[4.0, 9.0], Combiner::Geometric).unwrap();
        assert!((r.combined - 6.0).abs() < 1e-12);
        let r = combined_loss(&[2.0, 4.0, 8.0], Combiner::Geometric).unwrap();
        assert!((r.combined - 4.0).abs() < 1e-12);
        assert_eq!(r.users(), 3);
        let r = combined_loss(&[0.0, 5.0], Combiner::Geometric).unwrap();
        assert_eq!(r.combined, 0.0);
        assert!(r.grads.iter().all(|&g| g == 0.0));
        let r = combined_loss(&[4.0, 9.0], Combiner::Arithmetic).unwrap();
        assert_eq!(r.combined, 6.5);
        assert_eq!(r.grads, vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_negative_or_nan() {
        assert!(combined_loss(&[1.0, -0.5], Combiner::Geometric).is_err());
        assert!(combined_loss(&[f64::NAN], Combiner::Arithmetic).is_err());
        assert!(combined_loss(&[], Combiner::Geometric).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let at = [4.0, 9.0];
        let r = combined_loss(&at, Combiner::Geometric).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            let mut p = at;
            let mut m = at;
            p[i] += h;
            m[i] -= h;
            let num = (combined_loss(&p, Combiner::Geometric).unwrap().combined
                - combined_loss(&m, Combiner::Geometric).unwrap().combined)
                / (2.0 * h);
            assert!((num - r.grads[i]).abs() / r.grads[i].abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn geometric_properties(a in 1e-3f64..10.0, b in 1e-3f64..10.0, bump in 1e-3f64..1.0) {
            let base = combined_loss(&[a, b], Combiner::Geometric).unwrap().combined;
            let up = combined_loss(&[a, b + bump], Combiner::Geometric).unwrap().combined;
            prop_assert!(up > base);
            prop_assert!(base >= a.min(b) * (1.0 - 1e-12));
            prop_assert!(base <= a.max(b) * (1.0 + 1e-12));
            if (a - b).abs() > 1e-9 {
                prop_assert!(base > a.min(b));
            }
            let eq = combined_loss(&[a, a], Combiner::Geometric).unwrap().combined;
            prop_assert!((eq - a).abs() <= 1e-12 * a);
        }
    }
}
