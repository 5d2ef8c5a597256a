use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{Dense, Gradients, Mlp};
use crate::{Error, Result};

/// Adam moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Dense>,
    pub second: Vec<Dense>,
    pub step: u64,
    pub config: AdamConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamState {
    pub fn new(params: &Mlp) -> Self {
        Self::with_config(params, AdamConfig::default())
    }

    pub fn with_config(params: &Mlp, config: AdamConfig) -> Self {
        let zeros: Vec<Dense> = params
            .layers
            .iter()
            .map(|l| Dense::zeros(l.input_dim(), l.output_dim()))
            .collect();
        Self { first: zeros.clone(), second: zeros, step: 0, config }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Non-finite gradients are rejected before anything is modified.
pub fn adam_step(params: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let shapes_match = grads.layers.len() == params.layers.len()
        && state.first.len() == params.layers.len()
        && params.layers.iter().zip(&grads.layers).all(|(p, g)| {
            p.weights.dim() == g.weights.dim() && p.biases.len() == g.biases.len()
        });
    if !shapes_match {
        return Err(Error::Shape("gradients do not match parameters".into()));
    }
    if !grads.is_finite() {
        return Err(Error::GradientBlowUp);
    }
    let AdamConfig { beta1, beta2, epsilon } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    for (((p, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.first)
        .zip(&mut state.second)
    {
        Zip::from(&mut p.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
            });
        Zip::from(&mut p.biases)
            .and(&g.biases)
            .and(&mut m.biases)
            .and(&mut v.biases)
            .for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
            });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, OutputActivation};
    use ndarray::array;

    fn scalar(w: f64) -> Mlp {
        Mlp::from_layers(
            vec![Dense { weights: array![[w]], biases: array![0.0] }],
            Activation::Relu,
            OutputActivation::Linear,
        )
        .unwrap()
    }

    fn grad(g: f64) -> Gradients {
        Gradients { layers: vec![Dense { weights: array![[g]], biases: array![0.0] }] }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(0.5);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grad(1.0), &mut s, 0.1).unwrap();
        let after_one = p.clone();
        let m_before = s.first[0].weights[[0, 0]];
        adam_step(&mut p, &grad(0.0), &mut s, 0.0).unwrap();
        assert_eq!(p, after_one);
        assert!((s.first[0].weights[[0, 0]] - 0.9 * m_before).abs() < 1e-15);

        let mut fresh = scalar(0.5);
        let mut s = AdamState::new(&fresh);
        adam_step(&mut fresh, &grad(0.0), &mut s, 0.1).unwrap();
        assert_eq!(fresh, scalar(0.5));
        assert_eq!(s.step, 1);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p);
        for _ in 0..50 {
            adam_step(&mut p, &grad(2.0), &mut s, 0.01).unwrap();
        }
        assert!(p.layers[0].weights[[0, 0]] < -0.4);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + ε).
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &grad(1.0), &mut s, 1e-3).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p.layers[0].weights[[0, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = scalar(0.3);
        let mut s = AdamState::new(&p);
        assert!(matches!(
            adam_step(&mut p, &grad(f64::INFINITY), &mut s, 0.1),
            Err(Error::GradientBlowUp)
        ));
        assert_eq!(p, scalar(0.3));
        assert_eq!(s.step, 0);
    }
}
