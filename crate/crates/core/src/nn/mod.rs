//! Minimal neural-network engine: tensors through layer stacks, parameter
//! training with minibatch SGD, and exact gradients with respect to inputs.
//!
//! Only the layer kinds the two classifier architectures need are
//! implemented: valid-padding stride-1 Conv2D, MaxPool2D with stride equal to
//! the pool size, Flatten, and Dense. Everything runs in f64 so analytic
//! gradients can be checked against central finite differences.
//!
//! Layout conventions:
//! - image tensors are `[H, W, C]`, row-major, channel fastest;
//! - Conv2D weights are `[filters][kh][kw][in_c]`, bias `[filters]`;
//! - Dense weights are `[in][out]`, bias `[out]`.

mod gradcheck;
mod layers;
mod loss;
mod train;

pub use gradcheck::{finite_diff_check, finite_diff_check_sampled};
pub use loss::{cross_entropy_t, floor_probs, kl_loss, softmax_t};
pub(crate) use train::train_with;
pub use train::{mean_loss, train, Dataset, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::Tensor;
use rand::Rng as _;

/// Elementwise activation applied after a Conv2D or Dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

/// Architecture description of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid padding, stride 1.
    Conv2D {
        filters: usize,
        kernel: (usize, usize),
        activation: Activation,
    },
    /// Stride equals pool size, floor division on the output dims.
    MaxPool2D { pool: (usize, usize) },
    Flatten,
    Dense { size: usize, activation: Activation },
}

/// Weight/bias storage for one layer. Parameter-free layers hold empty vecs.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn empty() -> Self {
        LayerParams { weights: Vec::new(), bias: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gradients with respect to every parameter, mirroring [`LayerParams`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

/// An ordered layer stack with parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    params: Vec<LayerParams>,
}

impl Model {
    /// Build a model with seeded Kaiming-style uniform fan-in init
    /// (biases start at zero). Validates the whole shape chain.
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let shapes = output_shapes(&input_shape, &layers)?;
        let mut params = Vec::with_capacity(layers.len());
        let mut rng = rng_from_seed(derive_seed(seed, "weight-init", 0));
        let mut cur = input_shape.clone();
        for (spec, out_shape) in layers.iter().zip(&shapes) {
            let p = match spec {
                LayerSpec::Conv2D { filters, kernel: (kh, kw), .. } => {
                    let in_c = cur[2];
                    let fan_in = kh * kw * in_c;
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let weights = (0..filters * kh * kw * in_c)
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect();
                    LayerParams { weights, bias: vec![0.0; *filters] }
                }
                LayerSpec::Dense { size, .. } => {
                    let fan_in = cur[0];
                    let bound = (6.0 / fan_in as f64).sqrt();
                    let weights =
                        (0..fan_in * size).map(|_| rng.gen_range(-bound..bound)).collect();
                    LayerParams { weights, bias: vec![0.0; *size] }
                }
                _ => LayerParams::empty(),
            };
            params.push(p);
            cur = out_shape.clone();
        }
        Ok(Model { input_shape, layers, params })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    /// Replace all parameters; shapes must match the existing ones.
    pub fn set_params(&mut self, params: Vec<LayerParams>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::invalid("layer count mismatch in set_params"));
        }
        for (new, old) in params.iter().zip(&self.params) {
            if new.weights.len() != old.weights.len() || new.bias.len() != old.bias.len() {
                return Err(Error::invalid("parameter shape mismatch in set_params"));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Shape of each layer's output, in order.
    pub fn layer_output_shapes(&self) -> Vec<Vec<usize>> {
        output_shapes(&self.input_shape, &self.layers).expect("validated at construction")
    }

    /// Shape of the final output (the logits).
    pub fn output_shape(&self) -> Vec<usize> {
        self.layer_output_shapes().last().cloned().unwrap_or_else(|| self.input_shape.clone())
    }

    /// Number of output classes (length of the logit vector).
    pub fn num_classes(&self) -> usize {
        self.output_shape().iter().product()
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.params.iter().map(LayerParams::len).sum()
    }

    /// True when both models share input shape and layer stack (parameters
    /// may differ).
    pub fn same_architecture(&self, other: &Model) -> bool {
        self.input_shape == other.input_shape && self.layers == other.layers
    }

    /// Parameter count per layer (zeros for parameter-free layers).
    pub fn per_layer_param_counts(&self) -> Vec<usize> {
        self.params.iter().map(LayerParams::len).collect()
    }

    /// Deterministic little-endian byte image of every parameter, used for
    /// reproducibility checks.
    pub fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.param_count() * 8);
        for p in &self.params {
            for v in p.weights.iter().chain(&p.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Run the layer stack, returning the logits.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for (spec, params) in self.layers.iter().zip(&self.params) {
            cur = layers::forward(spec, params, &cur).0;
        }
        Ok(cur)
    }

    /// Forward pass that records everything backward needs.
    pub fn forward_trace(&self, x: &Tensor) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut traces = Vec::with_capacity(self.layers.len());
        for (spec, params) in self.layers.iter().zip(&self.params) {
            let (out, trace) = layers::forward(spec, params, &cur);
            traces.push(trace);
            cur = out;
        }
        Ok(ForwardTrace { layers: traces, logits: cur })
    }

    /// Backpropagate a gradient with respect to the logits, producing the
    /// parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, trace: &ForwardTrace, dlogits: &[f64]) -> (Gradients, Tensor) {
        assert_eq!(dlogits.len(), trace.logits.len(), "dlogits length mismatch");
        let mut grads: Vec<LayerParams> = self
            .params
            .iter()
            .map(|p| LayerParams {
                weights: vec![0.0; p.weights.len()],
                bias: vec![0.0; p.bias.len()],
            })
            .collect();
        let mut d = dlogits.to_vec();
        for idx in (0..self.layers.len()).rev() {
            d = layers::backward(
                &self.layers[idx],
                &self.params[idx],
                &trace.layers[idx],
                &d,
                &mut grads[idx],
            );
        }
        let dinput = Tensor::zeros(self.input_shape.clone());
        let mut dinput = dinput;
        dinput.data_mut().copy_from_slice(&d);
        (Gradients { layers: grads }, dinput)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match model input {:?}",
                x.shape(),
                self.input_shape
            )));
        }
        Ok(())
    }
}

/// Per-layer state captured during a traced forward pass.
#[derive(Debug, Clone)]
pub enum LayerTrace {
    Conv { input: Tensor, pre: Tensor },
    Pool { input_len: usize, indices: Vec<usize> },
    Flatten { input_shape: Vec<usize> },
    Dense { input: Tensor, pre: Tensor },
}

/// Everything a backward pass needs, plus the logits.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    layers: Vec<LayerTrace>,
    logits: Tensor,
}

impl ForwardTrace {
    pub fn logits(&self) -> &Tensor {
        &self.logits
    }
}

/// Gradient of `cross_entropy_t(forward(model, x), label, t)` with respect
/// to `x`, computed analytically by backpropagation.
pub fn grad_input(model: &Model, x: &Tensor, label: usize, t: f64) -> Result<Tensor> {
    let trace = model.forward_trace(x)?;
    let k = trace.logits.len();
    if label >= k {
        return Err(Error::invalid(format!("label {label} out of range for {k} classes")));
    }
    let dlogits = loss::ce_logit_grad(trace.logits.data(), label, t)?;
    let (_, dinput) = model.backward(&trace, &dlogits);
    Ok(dinput)
}

/// Compute every layer's output shape, validating the chain.
pub fn output_shapes(input_shape: &[usize], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    let mut cur = input_shape.to_vec();
    let mut shapes = Vec::with_capacity(layers.len());
    for (i, spec) in layers.iter().enumerate() {
        cur = match spec {
            LayerSpec::Conv2D { filters, kernel: (kh, kw), .. } => {
                if cur.len() != 3 {
                    return Err(Error::invalid(format!(
                        "layer {i}: Conv2D needs [H,W,C] input, got {cur:?}"
                    )));
                }
                if *kh == 0 || *kw == 0 || *filters == 0 {
                    return Err(Error::invalid(format!("layer {i}: Conv2D dims must be positive")));
                }
                let (h, w) = (cur[0], cur[1]);
                if h < *kh || w < *kw {
                    return Err(Error::invalid(format!(
                        "layer {i}: kernel ({kh},{kw}) larger than input ({h},{w})"
                    )));
                }
                vec![h - kh + 1, w - kw + 1, *filters]
            }
            LayerSpec::MaxPool2D { pool: (ph, pw) } => {
                if cur.len() != 3 {
                    return Err(Error::invalid(format!(
                        "layer {i}: MaxPool2D needs [H,W,C] input, got {cur:?}"
                    )));
                }
                if *ph == 0 || *pw == 0 {
                    return Err(Error::invalid(format!("layer {i}: pool dims must be positive")));
                }
                let (h, w) = (cur[0], cur[1]);
                if h / ph == 0 || w / pw == 0 {
                    return Err(Error::invalid(format!(
                        "layer {i}: pool ({ph},{pw}) larger than input ({h},{w})"
                    )));
                }
                vec![h / ph, w / pw, cur[2]]
            }
            LayerSpec::Flatten => vec![cur.iter().product()],
            LayerSpec::Dense { size, .. } => {
                if cur.len() != 1 {
                    return Err(Error::invalid(format!(
                        "layer {i}: Dense needs flat input, got {cur:?}"
                    )));
                }
                if *size == 0 {
                    return Err(Error::invalid(format!("layer {i}: Dense size must be positive")));
                }
                vec![*size]
            }
        };
        shapes.push(cur.clone());
    }
    Ok(shapes)
}
