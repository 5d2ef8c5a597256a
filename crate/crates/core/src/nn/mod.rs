//! A small dense-network stack: batched forward/backward passes, Adam,
//! soft target updates and a finite-difference gradient checker.
//!
//! Weights are stored `in × out` so a batch `X` (rows are samples) maps to
//! `X · W + b`.

mod adam;
mod checkpoint;
mod gradcheck;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_mlp, save_mlp, MlpRecord, MLP_SCHEMA_VERSION};
pub use gradcheck::grad_check;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    /// `bound · tanh(z)`.
    TanhScaled(f64),
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => z,
            OutputActivation::TanhScaled(b) => b * z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => 1.0,
            OutputActivation::TanhScaled(b) => {
                let t = z.tanh();
                b * (1.0 - t * t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((input, output)),
            biases: Array1::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn uniform(input: usize, output: usize, limit: f64, rng: &mut impl Rng) -> Self {
        let mut d = Self::zeros(input, output);
        d.weights.mapv_inplace(|_| rng.random_range(-limit..=limit));
        d.biases.mapv_inplace(|_| rng.random_range(-limit..=limit));
        d
    }
}

/// Multilayer perceptron parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpRecord", try_from = "MlpRecord")]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input of every layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every layer.
    pre: Vec<Array2<f64>>,
}

/// Parameter gradients with the same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.biases.iter().all(|v| v.is_finite())
        })
    }
}

impl Mlp {
    /// Hidden layers are drawn from `±1/√fan_in`; the final layer from
    /// `±final_limit` when given, otherwise the same fan-in rule.
    pub fn new(
        sizes: &[usize],
        hidden_activation: Activation,
        output_activation: OutputActivation,
        final_limit: Option<f64>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid architecture {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let fan_in = sizes[i];
                let limit = match final_limit {
                    Some(l) if i == n - 1 => l,
                    _ => 1.0 / (fan_in as f64).sqrt(),
                };
                Dense::uniform(sizes[i], sizes[i + 1], limit, rng)
            })
            .collect();
        Ok(Self { layers, hidden_activation, output_activation })
    }

    pub fn from_layers(
        layers: Vec<Dense>,
        hidden_activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let mlp = Self { layers, hidden_activation, output_activation };
        mlp.check()?;
        Ok(mlp)
    }

    fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.biases.len() != l.output_dim() {
                return Err(Error::Shape(format!("layer {i}: bias length")));
            }
            if i > 0 && self.layers[i - 1].output_dim() != l.input_dim() {
                return Err(Error::Shape(format!("layer {i}: input does not match previous output")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// `[input, hidden…, output]`.
    pub fn architecture(&self) -> Vec<usize> {
        let mut a = vec![self.input_dim()];
        a.extend(self.layers.iter().map(Dense::output_dim));
        a
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.architecture() == other.architecture()
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, Cache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weights) + &layer.biases;
            let a = if i == last {
                let act = self.output_activation;
                z.mapv(|v| act.apply(v))
            } else {
                let act = self.hidden_activation;
                z.mapv(|v| act.apply(v))
            };
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        Ok((x, Cache { inputs, pre }))
    }

    /// Forward pass without keeping a cache.
    pub fn predict_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weights) + &layer.biases;
            if i == last {
                let act = self.output_activation;
                z.mapv_inplace(|v| act.apply(v));
            } else {
                let act = self.hidden_activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            x = z;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Cache)> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (out, cache) = self.forward_batch(x)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Back-propagates `output_grad` (∂loss/∂output, one row per sample)
    /// and returns parameter gradients summed over the batch together with
    /// ∂loss/∂input.
    pub fn backward(
        &self,
        cache: &Cache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let last = self.layers.len() - 1;
        if cache.pre.len() != self.layers.len() {
            return Err(Error::Shape("cache does not match network depth".into()));
        }
        if output_grad.dim() != cache.pre[last].dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                output_grad.dim(),
                cache.pre[last].dim()
            )));
        }
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut upstream = output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let z = &cache.pre[i];
            let mut dz = upstream;
            if i == last {
                let act = self.output_activation;
                Zip::from(&mut dz).and(z).for_each(|d, &zv| *d *= act.derivative(zv));
            } else {
                let act = self.hidden_activation;
                Zip::from(&mut dz).and(z).for_each(|d, &zv| *d *= act.derivative(zv));
            }
            let dw = cache.inputs[i].t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            upstream = dz.dot(&self.layers[i].weights.t());
            grads.push(Dense { weights: dw, biases: db });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    /// Flat view of every parameter, layer by layer (weights row-major,
    /// then biases).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn parameter_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            if index < l.weights.len() {
                let cols = l.weights.ncols();
                return l.weights.get_mut((index / cols, index % cols));
            }
            index -= l.weights.len();
            if index < l.biases.len() {
                return l.biases.get_mut(index);
            }
            index -= l.biases.len();
        }
        None
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }
}

/// `θ' ← τ·θ + (1 − τ)·θ'` for every parameter.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !target.same_architecture(online) {
        return Err(Error::Shape(format!(
            "soft update between {:?} and {:?}",
            target.architecture(),
            online.architecture()
        )));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        Zip::from(&mut t.weights)
            .and(&o.weights)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        Zip::from(&mut t.biases)
            .and(&o.biases)
            .for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
    Ok(())
}
