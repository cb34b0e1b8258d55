use super::Model;
use crate::error::{Error, Result};

/// Largest relative disagreement between backpropagated parameter gradients
/// and central finite differences of `loss(model.forward(input))`.
///
/// `loss` returns the scalar loss and its gradient with respect to the model
/// output. The relative error of one parameter is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`; a model with
/// no parameters yields 0.
pub fn grad_check<L>(model: &Model, loss: L, input: &[f64], eps: f64) -> Result<f64>
where
    L: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::Usage(format!("grad_check eps must be in (0, 1e-2], got {eps}")));
    }
    let (out, tape) = model.forward_cached(input)?;
    let (_, g_out) = loss(&out)?;
    let (grads, _) = model.backward(&tape, &g_out)?;

    let names = param_names(model);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (t, analytic) in grads.tensors.iter().enumerate() {
        for (i, &a) in analytic.iter().enumerate() {
            let orig = probe.params()[t][i];
            probe.params_mut()[t][i] = orig + eps;
            let (lp, _) = loss(&probe.forward(input)?)?;
            probe.params_mut()[t][i] = orig - eps;
            let (lm, _) = loss(&probe.forward(input)?)?;
            probe.params_mut()[t][i] = orig;

            let numeric = (lp - lm) / (2.0 * eps);
            if !a.is_finite() || !numeric.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient at {}[{i}] (analytic {a}, numeric {numeric})",
                    names[t]
                )));
            }
            let denom = a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

fn param_names(model: &Model) -> Vec<String> {
    let mut names = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        let kind = match layer {
            super::Layer::Dense(_) => "dense",
            super::Layer::Conv1d(_) => "conv1d",
            super::Layer::Relu => continue,
        };
        names.push(format!("layer {i} ({kind}) weight"));
        names.push(format!("layer {i} ({kind}) bias"));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::{mse_with_grad, Dense, Layer, LayerSpec};
    use crate::rng;

    #[test]
    fn zero_parameter_model_is_zero() {
        let m = Model::new(vec![Layer::Relu]);
        let target = [0.3, 0.1];
        let err = grad_check(&m, |o| mse_with_grad(o, &target), &[0.5, -0.2], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn eps_out_of_range_rejected() {
        let m = Model::new(vec![Layer::Relu]);
        assert!(grad_check(&m, |o| mse_with_grad(o, &[0.0]), &[1.0], 0.1).is_err());
        assert!(grad_check(&m, |o| mse_with_grad(o, &[0.0]), &[1.0], 0.0).is_err());
    }

    #[test]
    fn non_finite_reports_parameter() {
        let mut d = Dense::zeros(1, 1);
        d.weight[0] = f64::NAN;
        let m = Model::new(vec![Layer::Dense(d)]);
        match grad_check(&m, |o| mse_with_grad(o, &[0.0]), &[1.0], 1e-5) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("layer 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dense_stack_passes() {
        let mut r = rng::stream(21);
        let m = Model::from_specs(
            &[
                LayerSpec::Dense { in_dim: 5, out_dim: 7 },
                LayerSpec::Relu,
                LayerSpec::Dense { in_dim: 7, out_dim: 3 },
            ],
            &mut r,
        )
        .unwrap();
        let target = [0.2, -0.4, 0.9];
        let err = grad_check(&m, |o| mse_with_grad(o, &target), &[0.3, -1.2, 0.8, 0.05, 1.5], 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
