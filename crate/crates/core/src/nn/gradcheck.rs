//! Central-finite-difference validation of the analytic input gradient.

use super::{grad_input, loss, Model};
use crate::error::Result;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;

const H: f64 = 1e-5;

/// Compare the analytic gradient of the cross-entropy loss (T=1) with respect
/// to every input element against central finite differences. Returns the max
/// relative error with denominator `max(|a|, |b|, 1e-8)`.
pub fn finite_diff_check(model: &Model, x: &Tensor, label: usize) -> Result<f64> {
    let coords: Vec<usize> = (0..x.len()).collect();
    check_coords(model, x, label, &coords)
}

/// Same check over a seeded random subset of `max_coords` input elements.
/// Full-image inputs make the exhaustive check needlessly expensive; a random
/// subset exercises every layer's backward path with the same tolerance.
pub fn finite_diff_check_sampled(
    model: &Model,
    x: &Tensor,
    label: usize,
    max_coords: usize,
    seed: u64,
) -> Result<f64> {
    if x.len() <= max_coords {
        return finite_diff_check(model, x, label);
    }
    let mut coords: Vec<usize> = (0..x.len()).collect();
    let mut rng = rng_from_seed(derive_seed(seed, "gradcheck-coords", 0));
    coords.shuffle(&mut rng);
    coords.truncate(max_coords);
    check_coords(model, x, label, &coords)
}

fn check_coords(model: &Model, x: &Tensor, label: usize, coords: &[usize]) -> Result<f64> {
    let analytic = grad_input(model, x, label, 1.0)?;
    let mut probe = x.clone();
    let mut max_rel = 0.0_f64;
    for &i in coords {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + H;
        let up = loss_at(model, &probe, label)?;
        probe.data_mut()[i] = orig - H;
        let down = loss_at(model, &probe, label)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

fn loss_at(model: &Model, x: &Tensor, label: usize) -> Result<f64> {
    let logits = model.forward(x)?;
    loss::cross_entropy_t(logits.data(), label, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use rand::Rng as _;

    fn random_input(shape: Vec<usize>, seed: u64) -> Tensor {
        let mut rng = rng_from_seed(seed);
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn dense_grad_matches_closed_form() {
        // single linear Dense layer: dL/dx = (p - onehot(y)) W^T
        let mut m = Model::new(
            vec![2],
            vec![LayerSpec::Dense { size: 2, activation: Activation::Linear }],
            0,
        )
        .unwrap();
        m.params_mut()[0].weights = vec![1.0, -1.0, 0.5, 2.0]; // [[1,-1],[0.5,2]]
        m.params_mut()[0].bias = vec![0.0, 0.0];
        let x = Tensor::from_vec(vec![1.0, 1.0]);
        let g = grad_input(&m, &x, 0, 1.0).unwrap();
        // logits = [1.5, 1.0]; p = softmax; dz = p - [1,0]
        let p1 = 1.0 / (1.0 + (0.5f64).exp()); // p[1]
        let dz = [-(p1), p1];
        let expect = [dz[0] + (-1.0) * dz[1], 0.5 * dz[0] + 2.0 * dz[1]];
        assert!((g.data()[0] - expect[0]).abs() < 1e-12);
        assert!((g.data()[1] - expect[1]).abs() < 1e-12);
        // frozen values from the closed form above
        assert!((g.data()[0] - (-0.755_081_13)).abs() < 1e-6);
        assert!((g.data()[1] - 0.566_310_84).abs() < 1e-6);
    }

    #[test]
    fn zero_weight_model_has_zero_gradient() {
        let mut m = Model::new(
            vec![3],
            vec![LayerSpec::Dense { size: 2, activation: Activation::Linear }],
            0,
        )
        .unwrap();
        m.params_mut()[0].weights = vec![0.0; 6];
        m.params_mut()[0].bias = vec![0.3, -0.3];
        let x = Tensor::from_vec(vec![0.1, 0.2, 0.3]);
        let g = grad_input(&m, &x, 0, 1.0).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
        assert_eq!(finite_diff_check(&m, &x, 0).unwrap(), 0.0);
    }

    #[test]
    fn random_small_models_pass_gradcheck() {
        // 100 random (model, input) pairs across layer mixes
        let mut worst = 0.0_f64;
        for trial in 0..100u64 {
            let seed = 1000 + trial;
            let (model, input) = if trial % 2 == 0 {
                let m = Model::new(
                    vec![6, 6, 1],
                    vec![
                        LayerSpec::Conv2D {
                            filters: 3,
                            kernel: (3, 3),
                            activation: Activation::Relu,
                        },
                        LayerSpec::MaxPool2D { pool: (2, 2) },
                        LayerSpec::Flatten,
                        LayerSpec::Dense { size: 4, activation: Activation::Relu },
                        LayerSpec::Dense { size: 2, activation: Activation::Linear },
                    ],
                    seed,
                )
                .unwrap();
                (m, random_input(vec![6, 6, 1], seed ^ 0xabc))
            } else {
                let m = Model::new(
                    vec![8],
                    vec![
                        LayerSpec::Dense { size: 10, activation: Activation::Relu },
                        LayerSpec::Dense { size: 3, activation: Activation::Linear },
                    ],
                    seed,
                )
                .unwrap();
                (m, random_input(vec![8], seed ^ 0xabc))
            };
            let label = (trial % 2) as usize;
            let err = finite_diff_check(&model, &input, label).unwrap();
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn sampled_check_subsets_large_inputs() {
        let m = Model::new(
            vec![10, 10, 1],
            vec![
                LayerSpec::Conv2D { filters: 2, kernel: (3, 3), activation: Activation::Relu },
                LayerSpec::Flatten,
                LayerSpec::Dense { size: 2, activation: Activation::Linear },
            ],
            5,
        )
        .unwrap();
        let x = random_input(vec![10, 10, 1], 6);
        let err = finite_diff_check_sampled(&m, &x, 1, 20, 7).unwrap();
        assert!(err < 1e-4, "sampled relative error {err}");
    }
}
