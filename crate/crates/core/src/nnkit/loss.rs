use crate::error::{Error, Result};

/// Mean squared error.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("mse operands", a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Gradient of `mse(output, target)` with respect to `output`.
pub fn mse_grad(output: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if output.len() != target.len() {
        return Err(Error::shape("mse operands", target.len(), output.len()));
    }
    let scale = 2.0 / output.len().max(1) as f64;
    Ok(output.iter().zip(target).map(|(o, t)| scale * (o - t)).collect())
}

pub fn mse_with_grad(output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    Ok((mse(output, target)?, mse_grad(output, target)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn known_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn symmetric() {
        let mut r = rng::stream(11);
        for _ in 0..100 {
            let n = r.random_range(1..20);
            let a: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
            assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        }
    }
}
