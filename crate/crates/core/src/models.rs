//! The two interference classifiers and their on-disk format.
//!
//! `build_spec_model` constructs the spectrogram CNN (163,922 parameters for
//! a 128x128x1 input under valid-padding arithmetic); `build_kpm_model`
//! constructs the KPM DNN (6,542 parameters at the default m=4, t=15,
//! hidden [80, 20]). Models serialize to the `.orml` binary format: little
//! endian, f32 parameters.

use crate::error::{Error, Result};
use crate::nn::{softmax_t, Activation, LayerSpec, Model};
use crate::tensor::Tensor;
use std::io::{Read, Write};
use std::path::Path;

/// Magic bytes opening every model file.
pub const MODEL_MAGIC: [u8; 4] = *b"ORML";
/// Current model file version.
pub const MODEL_VERSION: u8 = 1;
/// File extension for serialized models.
pub const MODEL_EXT: &str = "orml";

/// SOI class index (no interference).
pub const CLASS_SOI: usize = 0;
/// CWI class index (tone jammer present).
pub const CLASS_CWI: usize = 1;

/// Input shape of the spectrogram CNN.
pub fn spec_input_shape() -> Vec<usize> {
    vec![128, 128, 1]
}

/// Layer stack of the spectrogram CNN.
pub fn spec_model_layers() -> Vec<LayerSpec> {
    use Activation::*;
    vec![
        LayerSpec::Conv2D { filters: 16, kernel: (3, 3), activation: Relu },
        LayerSpec::MaxPool2D { pool: (2, 2) },
        LayerSpec::Conv2D { filters: 16, kernel: (3, 3), activation: Relu },
        LayerSpec::MaxPool2D { pool: (2, 2) },
        LayerSpec::Conv2D { filters: 32, kernel: (3, 3), activation: Relu },
        LayerSpec::MaxPool2D { pool: (2, 2) },
        LayerSpec::Conv2D { filters: 32, kernel: (3, 3), activation: Relu },
        LayerSpec::Flatten,
        LayerSpec::Dense { size: 32, activation: Relu },
        LayerSpec::Dense { size: 2, activation: Linear },
    ]
}

/// Build the spectrogram CNN with seeded initialization.
pub fn build_spec_model(seed: u64) -> Model {
    Model::new(spec_input_shape(), spec_model_layers(), seed)
        .expect("spec model architecture is statically valid")
}

/// Architecture knobs of the KPM DNN: `m` features per report, `t` stacked
/// time windows, ReLU hidden layers, 2-way linear output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KpmDescriptor {
    pub m: usize,
    pub t: usize,
    pub hidden_sizes: Vec<usize>,
}

impl Default for KpmDescriptor {
    fn default() -> Self {
        KpmDescriptor { m: 4, t: 15, hidden_sizes: vec![80, 20] }
    }
}

impl KpmDescriptor {
    pub fn input_len(&self) -> usize {
        self.m * self.t
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut layers: Vec<LayerSpec> = self
            .hidden_sizes
            .iter()
            .map(|&size| LayerSpec::Dense { size, activation: Activation::Relu })
            .collect();
        layers.push(LayerSpec::Dense { size: 2, activation: Activation::Linear });
        layers
    }
}

/// Build the KPM DNN.
pub fn build_kpm_model(m: usize, t: usize, hidden_sizes: &[usize], seed: u64) -> Result<Model> {
    if m == 0 || t == 0 {
        return Err(Error::invalid("m and t must be >= 1"));
    }
    if hidden_sizes.is_empty() {
        return Err(Error::invalid("hidden_sizes must be non-empty"));
    }
    let desc = KpmDescriptor { m, t, hidden_sizes: hidden_sizes.to_vec() };
    Model::new(vec![desc.input_len()], desc.layers(), seed)
}

/// Run the classifier: argmax class plus the probability vector at T=1.
pub fn predict(model: &Model, x: &Tensor) -> Result<(usize, Vec<f64>)> {
    let logits = model.forward(x)?;
    let probs = softmax_t(logits.data(), 1.0)?;
    Ok((logits.argmax(), probs))
}

/// Serialize a model to `.orml` bytes.
pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MODEL_MAGIC);
    out.push(MODEL_VERSION);
    out.push(model.input_shape().len() as u8);
    for &d in model.input_shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.layers().len() as u16).to_le_bytes());
    for spec in model.layers() {
        match spec {
            LayerSpec::Conv2D { filters, kernel: (kh, kw), activation } => {
                out.push(0);
                out.extend_from_slice(&(*filters as u32).to_le_bytes());
                out.extend_from_slice(&(*kh as u32).to_le_bytes());
                out.extend_from_slice(&(*kw as u32).to_le_bytes());
                out.push(activation_code(*activation));
            }
            LayerSpec::MaxPool2D { pool: (ph, pw) } => {
                out.push(1);
                out.extend_from_slice(&(*ph as u32).to_le_bytes());
                out.extend_from_slice(&(*pw as u32).to_le_bytes());
            }
            LayerSpec::Flatten => out.push(2),
            LayerSpec::Dense { size, activation } => {
                out.push(3);
                out.extend_from_slice(&(*size as u32).to_le_bytes());
                out.push(activation_code(*activation));
            }
        }
    }
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        for v in p.weights.iter().chain(&p.bias) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

/// Deserialize a model from `.orml` bytes.
pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut r = ByteReader { buf: bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MODEL_MAGIC {
        return Err(Error::invalid("bad model file magic"));
    }
    let version = r.u8()?;
    if version != MODEL_VERSION {
        return Err(Error::invalid(format!("unsupported model file version {version}")));
    }
    let rank = r.u8()? as usize;
    let mut input_shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        input_shape.push(r.u32()? as usize);
    }
    let n_layers = r.u16()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let kind = r.u8()?;
        layers.push(match kind {
            0 => LayerSpec::Conv2D {
                filters: r.u32()? as usize,
                kernel: (r.u32()? as usize, r.u32()? as usize),
                activation: activation_from_code(r.u8()?)?,
            },
            1 => LayerSpec::MaxPool2D { pool: (r.u32()? as usize, r.u32()? as usize) },
            2 => LayerSpec::Flatten,
            3 => LayerSpec::Dense {
                size: r.u32()? as usize,
                activation: activation_from_code(r.u8()?)?,
            },
            other => return Err(Error::invalid(format!("unknown layer kind {other}"))),
        });
    }
    let mut model = Model::new(input_shape, layers, 0)?;
    let n_params = r.u64()? as usize;
    if n_params != model.param_count() {
        return Err(Error::invalid(format!(
            "parameter count {n_params} does not match architecture ({})",
            model.param_count()
        )));
    }
    let mut params = model.params().to_vec();
    for p in &mut params {
        for v in p.weights.iter_mut().chain(p.bias.iter_mut()) {
            *v = r.f32()? as f64;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::invalid("trailing bytes in model file"));
    }
    model.set_params(params)?;
    Ok(model)
}

/// Write a model to disk in `.orml` format.
pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let bytes = model_to_bytes(model);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Load a model from an `.orml` file.
pub fn load_model(path: &Path) -> Result<Model> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    model_from_bytes(&bytes)
}

/// Quantize a model's parameters to f32 precision in place, matching what a
/// save/load round trip produces. Deployed models go through this before
/// entering an xApp.
pub fn quantize_to_f32(model: &Model) -> Model {
    let mut m = model.clone();
    for p in m.params_mut() {
        for v in p.weights.iter_mut().chain(p.bias.iter_mut()) {
            *v = *v as f32 as f64;
        }
    }
    m
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Linear => 1,
    }
}

fn activation_from_code(c: u8) -> Result<Activation> {
    match c {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Linear),
        other => Err(Error::invalid(format!("unknown activation code {other}"))),
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::invalid("model file truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
