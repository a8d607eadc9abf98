//! Minimal dense feed-forward networks with reverse-mode gradients.
//!
//! Only what the autoencoder needs: affine layers with ReLU / LeakyReLU /
//! Sigmoid / Identity activations, exact backpropagation, and Adam / SGD
//! parameter updates. Everything is double precision and deterministic under
//! a fixed seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Slope of the negative branch of LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Adam defaults.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Elementwise activation applied after each affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation value.
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => {
                let s = Activation::Sigmoid.apply(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Ok(Activation::LeakyRelu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

/// One affine-then-activation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Weight matrix, `output_dim × input_dim`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
    /// Seed the parameters were initialized from.
    pub seed: u64,
}

impl DenseNetwork {
    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

/// Intermediate values kept by [`forward`] so that [`backward`] can run.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input seen by each layer.
    inputs: Vec<DVector<f64>>,
    /// Pre-activation value of each layer.
    pre_activations: Vec<DVector<f64>>,
}

/// Per-parameter gradients, shaped like the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
            biases: net.layers.iter().map(|l| DVector::zeros(l.bias.len())).collect(),
        }
    }

    /// Accumulate `other`, for minibatch averaging.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Glorot-uniform initialization: weights uniform in
/// `±√(6/(fan_in + fan_out))`, biases zero, deterministic under the seed.
pub fn init_network(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<DenseNetwork> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least an input and an output size, got {layer_sizes:?}"
        )));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Config(format!(
            "{} layer transitions but {} activations",
            layer_sizes.len() - 1,
            activations.len()
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Config("layer sizes must be at least 1".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_sizes
        .windows(2)
        .zip(activations)
        .map(|(pair, &activation)| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights =
                DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit));
            DenseLayer {
                weights,
                bias: DVector::zeros(fan_out),
                activation,
            }
        })
        .collect();
    Ok(DenseNetwork { layers, seed })
}

/// Run the network on `x`, returning the output and the cache needed for
/// [`backward`].
pub fn forward(net: &DenseNetwork, x: &DVector<f64>) -> Result<(DVector<f64>, ForwardCache)> {
    if x.len() != net.input_dim() {
        return Err(Error::Data(format!(
            "input length {} does not match network input dimension {}",
            x.len(),
            net.input_dim()
        )));
    }
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut pre_activations = Vec::with_capacity(net.layers.len());
    let mut current = x.clone();
    for layer in &net.layers {
        let pre = &layer.weights * &current + &layer.bias;
        let activated = pre.map(|v| layer.activation.apply(v));
        debug_assert!(activated.iter().all(|v| v.is_finite()), "non-finite activation");
        inputs.push(current);
        pre_activations.push(pre);
        current = activated;
    }
    Ok((
        current,
        ForwardCache {
            inputs,
            pre_activations,
        },
    ))
}

/// Exact reverse-mode gradients of the forward map.
///
/// `output_gradient` is ∂loss/∂output; returns the parameter gradients and
/// ∂loss/∂input.
pub fn backward(
    net: &DenseNetwork,
    cache: &ForwardCache,
    output_gradient: &DVector<f64>,
) -> Result<(Gradients, DVector<f64>)> {
    if cache.inputs.len() != net.layers.len() {
        return Err(Error::Data("cache does not match network depth".to_string()));
    }
    if output_gradient.len() != net.output_dim() {
        return Err(Error::Data(format!(
            "output gradient length {} does not match output dimension {}",
            output_gradient.len(),
            net.output_dim()
        )));
    }
    let mut grads = Gradients::zeros_like(net);
    let mut upstream = output_gradient.clone();
    for (idx, layer) in net.layers.iter().enumerate().rev() {
        let pre = &cache.pre_activations[idx];
        if pre.len() != layer.bias.len() || cache.inputs[idx].len() != layer.weights.ncols() {
            return Err(Error::Data(format!("stale cache: shape mismatch at layer {idx}")));
        }
        let delta = DVector::from_fn(pre.len(), |i, _| {
            upstream[i] * layer.activation.derivative(pre[i])
        });
        grads.weights[idx] = &delta * cache.inputs[idx].transpose();
        grads.biases[idx] = delta.clone();
        upstream = layer.weights.transpose() * delta;
    }
    Ok((grads, upstream))
}

/// Optimizer selection for the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Optimizer state: learning rate, Adam moments and step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    first_moment: Gradients,
    second_moment: Gradients,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, net: &DenseNetwork) -> Self {
        Self {
            kind,
            learning_rate,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            step_count: 0,
        }
    }

    /// Apply one update in place. SGD: `p ← p − lr·g`; Adam: bias-corrected
    /// moment update with the standard constants.
    pub fn step(&mut self, net: &mut DenseNetwork, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Numerical(
                "non-finite gradient; training aborted".to_string(),
            ));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, (gw, gb)) in net
                    .layers
                    .iter_mut()
                    .zip(grads.weights.iter().zip(&grads.biases))
                {
                    layer.weights -= gw * self.learning_rate;
                    layer.bias -= gb * self.learning_rate;
                }
                self.step_count += 1;
            }
            OptimizerKind::Adam => {
                self.step_count += 1;
                let t = self.step_count as i32;
                let bias1 = 1.0 - ADAM_BETA1.powi(t);
                let bias2 = 1.0 - ADAM_BETA2.powi(t);
                for idx in 0..net.layers.len() {
                    adam_update(
                        &mut net.layers[idx].weights,
                        &mut self.first_moment.weights[idx],
                        &mut self.second_moment.weights[idx],
                        &grads.weights[idx],
                        self.learning_rate,
                        bias1,
                        bias2,
                    );
                    adam_update_vec(
                        &mut net.layers[idx].bias,
                        &mut self.first_moment.biases[idx],
                        &mut self.second_moment.biases[idx],
                        &grads.biases[idx],
                        self.learning_rate,
                        bias1,
                        bias2,
                    );
                }
            }
        }
        Ok(())
    }
}

fn adam_update(
    param: &mut DMatrix<f64>,
    m: &mut DMatrix<f64>,
    v: &mut DMatrix<f64>,
    g: &DMatrix<f64>,
    lr: f64,
    bias1: f64,
    bias2: f64,
) {
    for ((p, (m, v)), &g) in param
        .iter_mut()
        .zip(m.iter_mut().zip(v.iter_mut()))
        .zip(g.iter())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

fn adam_update_vec(
    param: &mut DVector<f64>,
    m: &mut DVector<f64>,
    v: &mut DVector<f64>,
    g: &DVector<f64>,
    lr: f64,
    bias1: f64,
    bias2: f64,
) {
    for ((p, (m, v)), &g) in param
        .iter_mut()
        .zip(m.iter_mut().zip(v.iter_mut()))
        .zip(g.iter())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    }
}

pub mod gradcheck {
    //! Finite-difference verification harness for the analytic gradients.

    use super::*;

    /// Flatten all parameters of a network into one vector.
    pub fn flatten_params(net: &DenseNetwork) -> Vec<f64> {
        let mut out = Vec::with_capacity(net.parameter_count());
        for layer in &net.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    /// Write a flat parameter vector back into the network.
    pub fn unflatten_params(net: &mut DenseNetwork, flat: &[f64]) {
        let mut pos = 0;
        for layer in &mut net.layers {
            for w in layer.weights.iter_mut() {
                *w = flat[pos];
                pos += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = flat[pos];
                pos += 1;
            }
        }
        assert_eq!(pos, flat.len());
    }

    /// Flatten gradients in the same order as [`flatten_params`].
    pub fn flatten_grads(grads: &Gradients) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in grads.weights.iter().zip(&grads.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }

    /// Central finite differences of `loss` over every parameter of `net`.
    pub fn finite_difference_grads(
        net: &DenseNetwork,
        h: f64,
        mut loss: impl FnMut(&DenseNetwork) -> f64,
    ) -> Vec<f64> {
        let base = flatten_params(net);
        let mut scratch = net.clone();
        let mut grads = Vec::with_capacity(base.len());
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += h;
            unflatten_params(&mut scratch, &plus);
            let up = loss(&scratch);
            let mut minus = base.clone();
            minus[i] -= h;
            unflatten_params(&mut scratch, &minus);
            let down = loss(&scratch);
            grads.push((up - down) / (2.0 * h));
        }
        grads
    }

    /// Relative L2 error between two gradient vectors.
    pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        diff / norm.max(1e-12)
    }
}
