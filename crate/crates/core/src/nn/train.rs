//! Minibatch SGD.

use super::{loss, LayerParams, Model};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;

/// Labeled tensor batches.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::invalid("inputs/labels length mismatch"));
        }
        Ok(Dataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Keep only the rows at `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Seeded stratified split; returns (train, test) with `test_fraction`
    /// of each class held out.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &l) in self.labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let mut rng = rng_from_seed(derive_seed(seed, "split", 0));
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for (_, mut idx) in by_class {
            idx.shuffle(&mut rng);
            let n_test = ((idx.len() as f64) * test_fraction).round() as usize;
            test_idx.extend_from_slice(&idx[..n_test]);
            train_idx.extend_from_slice(&idx[n_test..]);
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        (self.subset(&train_idx), self.subset(&test_idx))
    }
}

/// SGD hyperparameters. `temperature` is the softmax temperature used inside
/// the cross-entropy loss.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, epochs: 1, batch_size: 32, seed: 0, temperature: 1.0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::invalid("temperature must be > 0"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Mean loss per epoch, as observed during training.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
}

/// Plain minibatch SGD with the temperature-scaled cross-entropy loss.
/// Bit-reproducible for a given (seed, dataset order).
pub fn train(model: &Model, data: &Dataset, cfg: &TrainConfig) -> Result<(Model, TrainReport)> {
    let t = cfg.temperature;
    train_with(model, data, cfg, |_idx, logits, label| {
        let l = loss::cross_entropy_t(logits, label, t)?;
        let g = loss::ce_logit_grad(logits, label, t)?;
        Ok((l, g))
    })
}

/// SGD over an arbitrary per-sample loss, supplied as a closure that maps
/// (sample index, logits, label) to (loss value, dLoss/dlogits). Used by the
/// distillation trainer in addition to the plain cross-entropy path.
pub(crate) fn train_with<F>(
    model: &Model,
    data: &Dataset,
    cfg: &TrainConfig,
    mut logit_loss_grad: F,
) -> Result<(Model, TrainReport)>
where
    F: FnMut(usize, &[f64], usize) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let classes = model.num_classes();
    for (i, &l) in data.labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::invalid(format!("label {l} at row {i} out of range ({classes} classes)")));
        }
    }

    let mut trained = model.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "shuffle", 0));
    let mut report = TrainReport { epoch_loss: Vec::with_capacity(cfg.epochs) };

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Vec<LayerParams> = trained
                .params()
                .iter()
                .map(|p| LayerParams {
                    weights: vec![0.0; p.weights.len()],
                    bias: vec![0.0; p.bias.len()],
                })
                .collect();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let trace = trained.forward_trace(&data.inputs[i])?;
                let (l, mut dlogits) = logit_loss_grad(i, trace.logits().data(), data.labels[i])?;
                epoch_loss += l;
                for g in &mut dlogits {
                    *g *= scale;
                }
                let (grads, _) = trained.backward(&trace, &dlogits);
                for (a, g) in acc.iter_mut().zip(grads.layers) {
                    for (x, y) in a.weights.iter_mut().zip(&g.weights) {
                        *x += y;
                    }
                    for (x, y) in a.bias.iter_mut().zip(&g.bias) {
                        *x += y;
                    }
                }
            }
            let lr = cfg.learning_rate;
            for (p, g) in trained.params_mut().iter_mut().zip(&acc) {
                for (x, y) in p.weights.iter_mut().zip(&g.weights) {
                    *x -= lr * y;
                }
                for (x, y) in p.bias.iter_mut().zip(&g.bias) {
                    *x -= lr * y;
                }
            }
        }
        report.epoch_loss.push(epoch_loss / data.len() as f64);
    }
    Ok((trained, report))
}

/// Mean cross-entropy loss of a model over a dataset at temperature `t`.
pub fn mean_loss(model: &Model, data: &Dataset, t: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let mut total = 0.0;
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        let logits = model.forward(x)?;
        total += loss::cross_entropy_t(logits.data(), y, t)?;
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};

    fn xor_dataset() -> Dataset {
        let pts = [
            ([0.0, 0.0], 0),
            ([0.0, 1.0], 1),
            ([1.0, 0.0], 1),
            ([1.0, 1.0], 0),
        ];
        Dataset {
            inputs: pts.iter().map(|(p, _)| Tensor::from_vec(p.to_vec())).collect(),
            labels: pts.iter().map(|&(_, l)| l).collect(),
        }
    }

    fn dnn_2_8_2(seed: u64) -> Model {
        Model::new(
            vec![2],
            vec![
                LayerSpec::Dense { size: 8, activation: Activation::Relu },
                LayerSpec::Dense { size: 2, activation: Activation::Linear },
            ],
            seed,
        )
        .unwrap()
    }

    #[test]
    fn xor_reaches_full_train_accuracy() {
        let data = xor_dataset();
        let cfg = TrainConfig {
            learning_rate: 0.5,
            epochs: 500,
            batch_size: 4,
            seed: 3,
            temperature: 1.0,
        };
        let model = dnn_2_8_2(3);
        let initial = mean_loss(&model, &data, 1.0).unwrap();
        let (trained, report) = train(&model, &data, &cfg).unwrap();
        let final_loss = mean_loss(&trained, &data, 1.0).unwrap();
        assert!(final_loss <= initial, "loss should not increase: {initial} -> {final_loss}");
        assert_eq!(report.epoch_loss.len(), 500);
        let correct = data
            .inputs
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| trained.forward(x).unwrap().argmax() == y)
            .count();
        assert_eq!(correct, 4, "XOR train accuracy must be 100%");
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let data = xor_dataset();
        let model = dnn_2_8_2(1);
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, ..Default::default() };
        let (trained, _) = train(&model, &data, &cfg).unwrap();
        assert_eq!(model.param_bytes(), trained.param_bytes());
    }

    #[test]
    fn same_seed_identical_parameters() {
        let data = xor_dataset();
        let model = dnn_2_8_2(1);
        let cfg = TrainConfig { learning_rate: 0.1, epochs: 5, seed: 77, ..Default::default() };
        let (a, _) = train(&model, &data, &cfg).unwrap();
        let (b, _) = train(&model, &data, &cfg).unwrap();
        assert_eq!(a.param_bytes(), b.param_bytes());
        let cfg2 = TrainConfig { seed: 78, ..cfg };
        let (c, _) = train(&model, &data, &cfg2).unwrap();
        assert_ne!(a.param_bytes(), c.param_bytes());
    }

    #[test]
    fn empty_dataset_rejected() {
        let model = dnn_2_8_2(1);
        let err = train(&model, &Dataset::default(), &TrainConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn out_of_range_label_rejected() {
        let model = dnn_2_8_2(1);
        let data = Dataset {
            inputs: vec![Tensor::from_vec(vec![0.0, 0.0])],
            labels: vec![2],
        };
        assert!(train(&model, &data, &TrainConfig::default()).is_err());
    }

    #[test]
    fn stratified_split_preserves_classes() {
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            inputs.push(Tensor::from_vec(vec![i as f64, 0.0]));
            labels.push(i % 2);
        }
        let data = Dataset { inputs, labels };
        let (train, test) = data.split(0.2, 42);
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        assert_eq!(test.labels.iter().filter(|&&l| l == 0).count(), 10);
        // seeded: same split twice
        let (_, test2) = data.split(0.2, 42);
        assert_eq!(test.labels, test2.labels);
    }
}
