use super::Mlp;
use crate::Result;

const STEP: f64 = 1e-5;

/// Largest relative disagreement between back-propagated gradients and
/// central finite differences, over every parameter.
///
/// `loss` maps the network output to `(loss, ∂loss/∂output)`.
pub fn grad_check<F>(params: &Mlp, input: &[f64], loss: F) -> Result<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (out, cache) = params.forward(input)?;
    let (_, d_out) = loss(&out);
    let d_out = ndarray::Array2::from_shape_vec((1, d_out.len()), d_out)
        .map_err(|e| crate::Error::Shape(e.to_string()))?;
    let (grads, _) = params.backward(&cache, d_out.view())?;
    let analytic = grads.flatten();

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let original = *probe.parameter_mut(i).expect("index within parameter count");
        *probe.parameter_mut(i).unwrap() = original + STEP;
        let plus = loss(&probe.predict(input)?).0;
        *probe.parameter_mut(i).unwrap() = original - STEP;
        let minus = loss(&probe.predict(input)?).0;
        *probe.parameter_mut(i).unwrap() = original;

        let numeric = (plus - minus) / (2.0 * STEP);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
