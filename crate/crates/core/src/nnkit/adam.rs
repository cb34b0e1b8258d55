use super::{Gradients, Model};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

/// Bias-corrected Adam with one moment pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Adam {
            config,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn for_model(config: AdamConfig, model: &Model) -> Self {
        let shapes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, mut params: Vec<&mut [f64]>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::shape("adam tensor count", self.first.len(), params.len().min(grads.len())));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != p.len() {
                return Err(Error::shape(format!("adam tensor {i}"), self.first[i].len(), g.len()));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for (((pi, &gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }

    pub fn step_model(&mut self, model: &mut Model, grads: &Gradients) -> Result<()> {
        self.step(model.params_mut(), &grads.tensors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient() {
        let mut opt = Adam::new(AdamConfig::default(), &[1]);
        let mut theta = [0.0];
        opt.step(vec![&mut theta], &[vec![2.0]]).unwrap();
        assert!((theta[0] + 1e-4).abs() < 1e-7, "{}", theta[0]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = Adam::new(AdamConfig::default(), &[3]);
        let mut theta = [0.5, -1.0, 2.0];
        for _ in 0..5 {
            opt.step(vec![&mut theta], &[vec![0.0; 3]]).unwrap();
        }
        assert_eq!(theta, [0.5, -1.0, 2.0]);
        assert_eq!(opt.step_count(), 5);
    }

    #[test]
    fn constant_gradient_steps_bounded_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut opt = Adam::new(cfg, &[1]);
        let mut theta = [0.0];
        let mut prev = 0.0;
        for _ in 0..2 {
            opt.step(vec![&mut theta], &[vec![3.7]]).unwrap();
            assert!((theta[0] - prev).abs() <= cfg.learning_rate + 1e-9);
            prev = theta[0];
        }
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut opt = Adam::new(AdamConfig::default(), &[2]);
        let mut theta = [0.0, 0.0];
        assert!(opt.step(vec![&mut theta], &[vec![1.0]]).is_err());
        assert_eq!(opt.step_count(), 0);
    }
}
