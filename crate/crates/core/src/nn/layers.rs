//! Forward/backward kernels for the four layer kinds.
//!
//! Inner loops are arranged so the hot paths are contiguous-slice dot
//! products and axpy updates: for Conv2D the (kx, c) pair of a weight row is
//! contiguous in both the kernel and the input row, giving `kh` dots of
//! length `kw*C` per output element.

use super::{Activation, LayerParams, LayerSpec, LayerTrace};
use crate::tensor::Tensor;

pub(super) fn forward(
    spec: &LayerSpec,
    params: &LayerParams,
    input: &Tensor,
) -> (Tensor, LayerTrace) {
    match spec {
        LayerSpec::Conv2D { filters, kernel, activation } => {
            let pre = conv2d_forward(input, params, *filters, *kernel);
            let out = activate(&pre, *activation);
            (out, LayerTrace::Conv { input: input.clone(), pre })
        }
        LayerSpec::MaxPool2D { pool } => {
            let (out, indices) = maxpool_forward(input, *pool);
            (out, LayerTrace::Pool { input_len: input.len(), indices })
        }
        LayerSpec::Flatten => {
            let shape = input.shape().to_vec();
            let out = input.clone().reshape(vec![input.len()]).expect("flatten");
            (out, LayerTrace::Flatten { input_shape: shape })
        }
        LayerSpec::Dense { size, activation } => {
            let pre = dense_forward(input, params, *size);
            let out = activate(&pre, *activation);
            (out, LayerTrace::Dense { input: input.clone(), pre })
        }
    }
}

/// Propagate `dout` through one layer, accumulating parameter gradients into
/// `grad` and returning the gradient with respect to the layer input.
pub(super) fn backward(
    spec: &LayerSpec,
    params: &LayerParams,
    trace: &LayerTrace,
    dout: &[f64],
    grad: &mut LayerParams,
) -> Vec<f64> {
    match (spec, trace) {
        (LayerSpec::Conv2D { filters, kernel, activation }, LayerTrace::Conv { input, pre }) => {
            let dpre = deactivate(pre, dout, *activation);
            conv2d_backward(input, params, *filters, *kernel, &dpre, grad)
        }
        (LayerSpec::MaxPool2D { .. }, LayerTrace::Pool { input_len, indices }) => {
            let mut din = vec![0.0; *input_len];
            for (o, &src) in indices.iter().enumerate() {
                din[src] += dout[o];
            }
            din
        }
        (LayerSpec::Flatten, LayerTrace::Flatten { .. }) => dout.to_vec(),
        (LayerSpec::Dense { size, activation }, LayerTrace::Dense { input, pre }) => {
            let dpre = deactivate(pre, dout, *activation);
            dense_backward(input, params, *size, &dpre, grad)
        }
        _ => unreachable!("layer/trace mismatch"),
    }
}

fn activate(pre: &Tensor, act: Activation) -> Tensor {
    match act {
        Activation::Linear => pre.clone(),
        Activation::Relu => {
            let mut out = pre.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            out
        }
    }
}

fn deactivate(pre: &Tensor, dout: &[f64], act: Activation) -> Vec<f64> {
    match act {
        Activation::Linear => dout.to_vec(),
        Activation::Relu => pre
            .data()
            .iter()
            .zip(dout)
            .map(|(&p, &d)| if p > 0.0 { d } else { 0.0 })
            .collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(acc: &mut [f64], x: &[f64], a: f64) {
    debug_assert_eq!(acc.len(), x.len());
    for (o, &v) in acc.iter_mut().zip(x) {
        *o += a * v;
    }
}

fn conv2d_forward(input: &Tensor, params: &LayerParams, filters: usize, k: (usize, usize)) -> Tensor {
    let (kh, kw) = k;
    let [h, w, c] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let x = input.data();
    let row_w = kw * c;
    let mut out = vec![0.0; oh * ow * filters];
    for oy in 0..oh {
        for ox in 0..ow {
            let out_base = (oy * ow + ox) * filters;
            for f in 0..filters {
                let mut acc = params.bias[f];
                let w_base = f * kh * row_w;
                for ky in 0..kh {
                    let in_start = ((oy + ky) * w + ox) * c;
                    acc += dot(
                        &x[in_start..in_start + row_w],
                        &params.weights[w_base + ky * row_w..w_base + (ky + 1) * row_w],
                    );
                }
                out[out_base + f] = acc;
            }
        }
    }
    Tensor::new(vec![oh, ow, filters], out).expect("conv output")
}

fn conv2d_backward(
    input: &Tensor,
    params: &LayerParams,
    filters: usize,
    k: (usize, usize),
    dpre: &[f64],
    grad: &mut LayerParams,
) -> Vec<f64> {
    let (kh, kw) = k;
    let [h, w, c] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let x = input.data();
    let row_w = kw * c;
    let mut din = vec![0.0; x.len()];
    for oy in 0..oh {
        for ox in 0..ow {
            let out_base = (oy * ow + ox) * filters;
            for f in 0..filters {
                let g = dpre[out_base + f];
                if g == 0.0 {
                    continue;
                }
                grad.bias[f] += g;
                let w_base = f * kh * row_w;
                for ky in 0..kh {
                    let in_start = ((oy + ky) * w + ox) * c;
                    axpy(
                        &mut grad.weights[w_base + ky * row_w..w_base + (ky + 1) * row_w],
                        &x[in_start..in_start + row_w],
                        g,
                    );
                    axpy(
                        &mut din[in_start..in_start + row_w],
                        &params.weights[w_base + ky * row_w..w_base + (ky + 1) * row_w],
                        g,
                    );
                }
            }
        }
    }
    din
}

fn maxpool_forward(input: &Tensor, pool: (usize, usize)) -> (Tensor, Vec<usize>) {
    let (ph, pw) = pool;
    let [h, w, c] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let (oh, ow) = (h / ph, w / pw);
    let x = input.data();
    let mut out = vec![0.0; oh * ow * c];
    let mut indices = vec![0usize; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dy in 0..ph {
                    for dx in 0..pw {
                        let idx = ((oy * ph + dy) * w + (ox * pw + dx)) * c + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (oy * ow + ox) * c + ch;
                out[o] = best;
                indices[o] = best_idx;
            }
        }
    }
    (Tensor::new(vec![oh, ow, c], out).expect("pool output"), indices)
}

fn dense_forward(input: &Tensor, params: &LayerParams, size: usize) -> Tensor {
    let x = input.data();
    let mut out = params.bias.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        axpy(&mut out, &params.weights[i * size..(i + 1) * size], xi);
    }
    Tensor::new(vec![size], out).expect("dense output")
}

fn dense_backward(
    input: &Tensor,
    params: &LayerParams,
    size: usize,
    dpre: &[f64],
    grad: &mut LayerParams,
) -> Vec<f64> {
    let x = input.data();
    let mut din = vec![0.0; x.len()];
    for (j, &g) in dpre.iter().enumerate() {
        grad.bias[j] += g;
    }
    for (i, &xi) in x.iter().enumerate() {
        let row = &params.weights[i * size..(i + 1) * size];
        din[i] = dot(row, dpre);
        if xi != 0.0 {
            axpy(&mut grad.weights[i * size..(i + 1) * size], dpre, xi);
        }
    }
    din
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, Model};

    #[test]
    fn conv_known_values() {
        // 3x3 single-channel input, one 2x2 all-ones filter, bias 0.5:
        // each output = sum of the 2x2 window + 0.5
        let mut m = Model::new(
            vec![3, 3, 1],
            vec![LayerSpec::Conv2D { filters: 1, kernel: (2, 2), activation: Activation::Linear }],
            0,
        )
        .unwrap();
        m.params_mut()[0].weights = vec![1.0; 4];
        m.params_mut()[0].bias = vec![0.5];
        let x = Tensor::new(vec![3, 3, 1], (1..=9).map(f64::from).collect()).unwrap();
        let y = m.forward(&x).unwrap();
        assert_eq!(y.data(), &[12.5, 16.5, 24.5, 28.5]);
    }

    #[test]
    fn maxpool_picks_max_and_routes_gradient() {
        let x = Tensor::new(vec![2, 2, 1], vec![1.0, 5.0, 2.0, 3.0]).unwrap();
        let (out, idx) = maxpool_forward(&x, (2, 2));
        assert_eq!(out.data(), &[5.0]);
        assert_eq!(idx, vec![1]);
    }

    #[test]
    fn dense_known_values() {
        let mut m = Model::new(
            vec![2],
            vec![LayerSpec::Dense { size: 2, activation: Activation::Linear }],
            0,
        )
        .unwrap();
        // weights [in=2][out=2]: [[1, -1], [0.5, 2]]
        m.params_mut()[0].weights = vec![1.0, -1.0, 0.5, 2.0];
        m.params_mut()[0].bias = vec![0.0, 1.0];
        let y = m.forward(&Tensor::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.data(), &[1.5, 2.0]);
    }

    #[test]
    fn relu_masks_backward() {
        let pre = Tensor::from_vec(vec![-1.0, 0.0, 2.0]);
        let d = deactivate(&pre, &[1.0, 1.0, 1.0], Activation::Relu);
        assert_eq!(d, vec![0.0, 0.0, 1.0]);
    }
}
