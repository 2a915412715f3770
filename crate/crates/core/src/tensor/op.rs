//! Recorded operations and their backward rules.

use super::Tensor;

pub(crate) const SELU_LAMBDA: f64 = 1.0507009873554805;
pub(crate) const SELU_ALPHA: f64 = 1.6732632423543772;

pub(crate) enum Op {
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Div(Tensor, Tensor),
    AddScalar(Tensor),
    MulScalar(Tensor, f64),
    /// `c − x`.
    RsubScalar(Tensor),
    AddRow { mat: Tensor, row: Tensor },
    SubRow { mat: Tensor, row: Tensor },
    MulRow { mat: Tensor, row: Tensor },
    Matmul(Tensor, Tensor),
    Relu(Tensor),
    LeakyRelu(Tensor, f64),
    Elu(Tensor),
    Selu(Tensor),
    Square(Tensor),
    Mean(Tensor),
    Sum(Tensor),
    RowSlice { x: Tensor, start: usize },
    BatchVariance { x: Tensor, divisor: f64, mean: Vec<f64> },
    SoftmaxCrossEntropy { logits: Tensor, labels: Vec<usize>, probs: Vec<f64> },
    BatchNorm { x: Tensor, gamma: Tensor, shift: Tensor, mean: Vec<f64>, inv_std: Vec<f64> },
    LayerNorm { x: Tensor, gamma: Tensor, shift: Tensor, mean: Vec<f64>, inv_std: Vec<f64> },
    /// `y_i = scale_i · x_i + offset_i` with a fixed (non-trained) mask.
    ElementwiseAffine { x: Tensor, scale: Vec<f64> },
}

impl Op {
    pub(crate) fn inputs(&self) -> Vec<&Tensor> {
        match self {
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::Matmul(a, b) => {
                vec![a, b]
            }
            Op::AddRow { mat, row } | Op::SubRow { mat, row } | Op::MulRow { mat, row } => {
                vec![mat, row]
            }
            Op::AddScalar(x)
            | Op::MulScalar(x, _)
            | Op::RsubScalar(x)
            | Op::Relu(x)
            | Op::LeakyRelu(x, _)
            | Op::Elu(x)
            | Op::Selu(x)
            | Op::Square(x)
            | Op::Mean(x)
            | Op::Sum(x)
            | Op::RowSlice { x, .. }
            | Op::BatchVariance { x, .. }
            | Op::ElementwiseAffine { x, .. } => vec![x],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![logits],
            Op::BatchNorm { x, gamma, shift, .. } | Op::LayerNorm { x, gamma, shift, .. } => {
                vec![x, gamma, shift]
            }
        }
    }

    /// Propagates `grad` (the gradient of the loss w.r.t. `out`) into this
    /// operation's inputs. Inputs outside the gradient-tracked subgraph are
    /// skipped.
    pub(crate) fn backward(&self, grad: &[f64], out: &Tensor) {
        match self {
            Op::Add(a, b) => {
                if a.requires_grad() {
                    a.accumulate_grad(grad);
                }
                if b.requires_grad() {
                    b.accumulate_grad(grad);
                }
            }
            Op::Sub(a, b) => {
                if a.requires_grad() {
                    a.accumulate_grad(grad);
                }
                if b.requires_grad() {
                    let gb: Vec<f64> = grad.iter().map(|g| -g).collect();
                    b.accumulate_grad(&gb);
                }
            }
            Op::Mul(a, b) => {
                if a.requires_grad() {
                    let bd = b.data_ref();
                    let ga: Vec<f64> = grad.iter().zip(bd.iter()).map(|(g, b)| g * b).collect();
                    a.accumulate_grad(&ga);
                }
                if b.requires_grad() {
                    let ad = a.data_ref();
                    let gb: Vec<f64> = grad.iter().zip(ad.iter()).map(|(g, a)| g * a).collect();
                    b.accumulate_grad(&gb);
                }
            }
            Op::Div(a, b) => {
                let bd = b.data_ref();
                if a.requires_grad() {
                    let ga: Vec<f64> = grad.iter().zip(bd.iter()).map(|(g, b)| g / b).collect();
                    a.accumulate_grad(&ga);
                }
                if b.requires_grad() {
                    let ad = a.data_ref();
                    let gb: Vec<f64> = grad
                        .iter()
                        .zip(ad.iter().zip(bd.iter()))
                        .map(|(g, (a, b))| -g * a / (b * b))
                        .collect();
                    b.accumulate_grad(&gb);
                }
            }
            Op::AddScalar(x) => {
                if x.requires_grad() {
                    x.accumulate_grad(grad);
                }
            }
            Op::MulScalar(x, c) => {
                if x.requires_grad() {
                    let gx: Vec<f64> = grad.iter().map(|g| g * c).collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::RsubScalar(x) => {
                if x.requires_grad() {
                    let gx: Vec<f64> = grad.iter().map(|g| -g).collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::AddRow { mat, row } | Op::SubRow { mat, row } => {
                let sign = if matches!(self, Op::SubRow { .. }) { -1.0 } else { 1.0 };
                if mat.requires_grad() {
                    mat.accumulate_grad(grad);
                }
                if row.requires_grad() {
                    let cols = row.len();
                    let mut gr = vec![0.0; cols];
                    for (i, g) in grad.iter().enumerate() {
                        gr[i % cols] += sign * g;
                    }
                    row.accumulate_grad(&gr);
                }
            }
            Op::MulRow { mat, row } => {
                let cols = row.len();
                if mat.requires_grad() {
                    let rd = row.data_ref();
                    let gm: Vec<f64> = grad
                        .iter()
                        .enumerate()
                        .map(|(i, g)| g * rd[i % cols])
                        .collect();
                    mat.accumulate_grad(&gm);
                }
                if row.requires_grad() {
                    let md = mat.data_ref();
                    let mut gr = vec![0.0; cols];
                    for (i, g) in grad.iter().enumerate() {
                        gr[i % cols] += g * md[i];
                    }
                    row.accumulate_grad(&gr);
                }
            }
            Op::Matmul(a, b) => {
                let (m, k) = (a.rows(), a.cols());
                let p = b.cols();
                if a.requires_grad() {
                    // ∂L/∂a = g · bᵀ
                    let bd = b.data_ref();
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..p {
                            let g = grad[i * p + j];
                            if g == 0.0 {
                                continue;
                            }
                            let brow = &bd[..];
                            for l in 0..k {
                                ga[i * k + l] += g * brow[l * p + j];
                            }
                        }
                    }
                    a.accumulate_grad(&ga);
                }
                if b.requires_grad() {
                    // ∂L/∂b = aᵀ · g
                    let ad = a.data_ref();
                    let mut gb = vec![0.0; k * p];
                    for i in 0..m {
                        for l in 0..k {
                            let av = ad[i * k + l];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..p {
                                gb[l * p + j] += av * grad[i * p + j];
                            }
                        }
                    }
                    b.accumulate_grad(&gb);
                }
            }
            Op::Relu(x) => {
                if x.requires_grad() {
                    let xd = x.data_ref();
                    let gx: Vec<f64> = grad
                        .iter()
                        .zip(xd.iter())
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::LeakyRelu(x, slope) => {
                if x.requires_grad() {
                    let xd = x.data_ref();
                    let gx: Vec<f64> = grad
                        .iter()
                        .zip(xd.iter())
                        .map(|(g, x)| if *x > 0.0 { *g } else { g * slope })
                        .collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::Elu(x) => {
                if x.requires_grad() {
                    let xd = x.data_ref();
                    let gx: Vec<f64> = grad
                        .iter()
                        .zip(xd.iter())
                        .map(|(g, x)| if *x > 0.0 { *g } else { g * x.exp() })
                        .collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::Selu(x) => {
                if x.requires_grad() {
                    let xd = x.data_ref();
                    let gx: Vec<f64> = grad
                        .iter()
                        .zip(xd.iter())
                        .map(|(g, x)| {
                            if *x > 0.0 {
                                g * SELU_LAMBDA
                            } else {
                                g * SELU_LAMBDA * SELU_ALPHA * x.exp()
                            }
                        })
                        .collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::Square(x) => {
                if x.requires_grad() {
                    let xd = x.data_ref();
                    let gx: Vec<f64> = grad
                        .iter()
                        .zip(xd.iter())
                        .map(|(g, x)| 2.0 * g * x)
                        .collect();
                    x.accumulate_grad(&gx);
                }
            }
            Op::Mean(x) => {
                if x.requires_grad() {
                    let scale = grad[0] / x.len() as f64;
                    x.accumulate_grad(&vec![scale; x.len()]);
                }
            }
            Op::Sum(x) => {
                if x.requires_grad() {
                    x.accumulate_grad(&vec![grad[0]; x.len()]);
                }
            }
            Op::RowSlice { x, start } => {
                if x.requires_grad() {
                    let cols = x.cols();
                    let mut gx = vec![0.0; x.len()];
                    gx[start * cols..start * cols + grad.len()].copy_from_slice(grad);
                    x.accumulate_grad(&gx);
                }
            }
            Op::BatchVariance { x, divisor, mean } => {
                if x.requires_grad() {
                    let (n, u) = (x.rows(), x.cols());
                    let xd = x.data_ref();
                    let mut gx = vec![0.0; n * u];
                    for i in 0..n {
                        for j in 0..u {
                            gx[i * u + j] =
                                grad[j] * 2.0 * (xd[i * u + j] - mean[j]) / divisor;
                        }
                    }
                    x.accumulate_grad(&gx);
                }
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                if logits.requires_grad() {
                    let (n, c) = (logits.rows(), logits.cols());
                    let scale = grad[0] / n as f64;
                    let mut gl = vec![0.0; n * c];
                    for i in 0..n {
                        for j in 0..c {
                            let indicator = if labels[i] == j { 1.0 } else { 0.0 };
                            gl[i * c + j] = scale * (probs[i * c + j] - indicator);
                        }
                    }
                    logits.accumulate_grad(&gl);
                }
            }
            Op::BatchNorm { x, gamma, shift, mean, inv_std } => {
                let (n, u) = (x.rows(), x.cols());
                let xd = x.data_ref();
                let gd = gamma.data_ref();
                let nf = n as f64;
                // Per-column reductions over the normalized values.
                let mut sum_dxhat = vec![0.0; u];
                let mut sum_dxhat_xhat = vec![0.0; u];
                let mut sum_g = vec![0.0; u];
                let mut sum_g_xhat = vec![0.0; u];
                for i in 0..n {
                    for j in 0..u {
                        let idx = i * u + j;
                        let xhat = (xd[idx] - mean[j]) * inv_std[j];
                        let dxhat = grad[idx] * gd[j];
                        sum_dxhat[j] += dxhat;
                        sum_dxhat_xhat[j] += dxhat * xhat;
                        sum_g[j] += grad[idx];
                        sum_g_xhat[j] += grad[idx] * xhat;
                    }
                }
                if x.requires_grad() {
                    let mut gx = vec![0.0; n * u];
                    for i in 0..n {
                        for j in 0..u {
                            let idx = i * u + j;
                            let xhat = (xd[idx] - mean[j]) * inv_std[j];
                            let dxhat = grad[idx] * gd[j];
                            gx[idx] = inv_std[j] / nf
                                * (nf * dxhat - sum_dxhat[j] - xhat * sum_dxhat_xhat[j]);
                        }
                    }
                    x.accumulate_grad(&gx);
                }
                if gamma.requires_grad() {
                    gamma.accumulate_grad(&sum_g_xhat);
                }
                if shift.requires_grad() {
                    shift.accumulate_grad(&sum_g);
                }
            }
            Op::LayerNorm { x, gamma, shift, mean, inv_std } => {
                let (n, u) = (x.rows(), x.cols());
                let xd = x.data_ref();
                let gd = gamma.data_ref();
                let uf = u as f64;
                let mut gx = vec![0.0; n * u];
                let mut ggamma = vec![0.0; u];
                let mut gshift = vec![0.0; u];
                for i in 0..n {
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..u {
                        let idx = i * u + j;
                        let xhat = (xd[idx] - mean[i]) * inv_std[i];
                        let dxhat = grad[idx] * gd[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        ggamma[j] += grad[idx] * xhat;
                        gshift[j] += grad[idx];
                    }
                    for j in 0..u {
                        let idx = i * u + j;
                        let xhat = (xd[idx] - mean[i]) * inv_std[i];
                        let dxhat = grad[idx] * gd[j];
                        gx[idx] = inv_std[i] / uf
                            * (uf * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
                    }
                }
                if x.requires_grad() {
                    x.accumulate_grad(&gx);
                }
                if gamma.requires_grad() {
                    gamma.accumulate_grad(&ggamma);
                }
                if shift.requires_grad() {
                    shift.accumulate_grad(&gshift);
                }
            }
            Op::ElementwiseAffine { x, scale } => {
                if x.requires_grad() {
                    let gx: Vec<f64> = grad
                        .iter()
                        .zip(scale.iter())
                        .map(|(g, s)| g * s)
                        .collect();
                    x.accumulate_grad(&gx);
                }
            }
        }
        let _ = out;
    }
}
