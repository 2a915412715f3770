//! Forward definitions of the differentiable operations.

use super::op::{Op, SELU_ALPHA, SELU_LAMBDA};
use super::{grad_enabled, Tensor};
use crate::error::{CoreError, Result};

impl Tensor {
    fn track_with(&self, others: &[&Tensor]) -> bool {
        grad_enabled()
            && (self.requires_grad() || others.iter().any(|t| t.requires_grad()))
    }

    fn finish(shape: Vec<usize>, data: Vec<f64>, track: bool, op: Op) -> Tensor {
        if track {
            Tensor::from_op(shape, data, op)
        } else {
            Tensor::detached(shape, data)
        }
    }

    fn same_shape(&self, other: &Tensor, opname: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CoreError::shape(
                opname,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }

    fn check_matrix(&self, opname: &'static str) -> Result<()> {
        if self.shape().len() != 2 {
            return Err(CoreError::shape(
                opname,
                format!("expected a 2-D tensor, got shape {:?}", self.shape()),
            ));
        }
        Ok(())
    }

    fn check_row(&self, row: &Tensor, opname: &'static str) -> Result<()> {
        self.check_matrix(opname)?;
        if row.shape().len() != 1 || row.len() != self.cols() {
            return Err(CoreError::shape(
                opname,
                format!(
                    "row of shape {:?} does not broadcast over {:?}",
                    row.shape(),
                    self.shape()
                ),
            ));
        }
        Ok(())
    }

    fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.data_ref()
            .iter()
            .zip(other.data_ref().iter())
            .map(|(&a, &b)| f(a, b))
            .collect()
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "add")?;
        let data = self.zip_map(other, |a, b| a + b);
        let track = self.track_with(&[other]);
        Ok(Tensor::finish(self.shape().to_vec(), data, track, Op::Add(self.clone(), other.clone())))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "sub")?;
        let data = self.zip_map(other, |a, b| a - b);
        let track = self.track_with(&[other]);
        Ok(Tensor::finish(self.shape().to_vec(), data, track, Op::Sub(self.clone(), other.clone())))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "mul")?;
        let data = self.zip_map(other, |a, b| a * b);
        let track = self.track_with(&[other]);
        Ok(Tensor::finish(self.shape().to_vec(), data, track, Op::Mul(self.clone(), other.clone())))
    }

    /// Elementwise division with IEEE semantics; a zero denominator is
    /// reported to stderr in debug builds.
    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.same_shape(other, "div")?;
        #[cfg(debug_assertions)]
        if other.data_ref().contains(&0.0) {
            eprintln!("tensor div: zero denominator (IEEE result propagated)");
        }
        let data = self.zip_map(other, |a, b| a / b);
        let track = self.track_with(&[other]);
        Ok(Tensor::finish(self.shape().to_vec(), data, track, Op::Div(self.clone(), other.clone())))
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data = self.data_ref().iter().map(|&x| x + c).collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::AddScalar(self.clone()))
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        let data = self.data_ref().iter().map(|&x| x * c).collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::MulScalar(self.clone(), c))
    }

    /// `c − self`, elementwise.
    pub fn rsub_scalar(&self, c: f64) -> Tensor {
        let data = self.data_ref().iter().map(|&x| c - x).collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::RsubScalar(self.clone()))
    }

    /// Adds a length-`cols` row vector to every row of a 2-D tensor.
    pub fn add_row(&self, row: &Tensor) -> Result<Tensor> {
        self.check_row(row, "add_row")?;
        let cols = self.cols();
        let rd = row.data_ref();
        let data: Vec<f64> = self
            .data_ref()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + rd[i % cols])
            .collect();
        let track = self.track_with(&[row]);
        Ok(Tensor::finish(
            self.shape().to_vec(),
            data,
            track,
            Op::AddRow { mat: self.clone(), row: row.clone() },
        ))
    }

    /// Subtracts a row vector from every row.
    pub fn sub_row(&self, row: &Tensor) -> Result<Tensor> {
        self.check_row(row, "sub_row")?;
        let cols = self.cols();
        let rd = row.data_ref();
        let data: Vec<f64> = self
            .data_ref()
            .iter()
            .enumerate()
            .map(|(i, &x)| x - rd[i % cols])
            .collect();
        let track = self.track_with(&[row]);
        Ok(Tensor::finish(
            self.shape().to_vec(),
            data,
            track,
            Op::SubRow { mat: self.clone(), row: row.clone() },
        ))
    }

    /// Multiplies every row by a row vector, elementwise.
    pub fn mul_row(&self, row: &Tensor) -> Result<Tensor> {
        self.check_row(row, "mul_row")?;
        let cols = self.cols();
        let rd = row.data_ref();
        let data: Vec<f64> = self
            .data_ref()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * rd[i % cols])
            .collect();
        let track = self.track_with(&[row]);
        Ok(Tensor::finish(
            self.shape().to_vec(),
            data,
            track,
            Op::MulRow { mat: self.clone(), row: row.clone() },
        ))
    }

    /// Matrix product `[m×k]·[k×p] → [m×p]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        self.check_matrix("matmul")?;
        other.check_matrix("matmul")?;
        if self.cols() != other.rows() {
            return Err(CoreError::shape(
                "matmul",
                format!("{:?} · {:?}", self.shape(), other.shape()),
            ));
        }
        let (m, k, p) = (self.rows(), self.cols(), other.cols());
        let ad = self.data_ref();
        let bd = other.data_ref();
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            for l in 0..k {
                let a = ad[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let brow = &bd[l * p..(l + 1) * p];
                let crow = &mut out[i * p..(i + 1) * p];
                for j in 0..p {
                    crow[j] += a * brow[j];
                }
            }
        }
        drop(ad);
        drop(bd);
        let track = self.track_with(&[other]);
        Ok(Tensor::finish(vec![m, p], out, track, Op::Matmul(self.clone(), other.clone())))
    }

    pub fn relu(&self) -> Tensor {
        let data = self.data_ref().iter().map(|&x| x.max(0.0)).collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::Relu(self.clone()))
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        let data = self
            .data_ref()
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::LeakyRelu(self.clone(), slope))
    }

    /// ELU with unit alpha: `x > 0 ? x : eˣ − 1`.
    pub fn elu(&self) -> Tensor {
        let data = self
            .data_ref()
            .iter()
            .map(|&x| if x > 0.0 { x } else { x.exp() - 1.0 })
            .collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::Elu(self.clone()))
    }

    /// SeLU with the standard published constants.
    pub fn selu(&self) -> Tensor {
        let data = self
            .data_ref()
            .iter()
            .map(|&x| {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * (x.exp() - 1.0)
                }
            })
            .collect();
        let track = self.track_with(&[]);
        Tensor::finish(self.shape().to_vec(), data, track, Op::Selu(self.clone()))
    }

    pub fn square(&self) -> Result<Tensor> {
        let data = self.data_ref().iter().map(|&x| x * x).collect();
        let track = self.track_with(&[]);
        Ok(Tensor::finish(self.shape().to_vec(), data, track, Op::Square(self.clone())))
    }

    /// Mean over all elements → scalar.
    pub fn mean(&self) -> Result<Tensor> {
        if self.is_empty() {
            return Err(CoreError::invalid("mean of an empty tensor"));
        }
        let m = self.data_ref().iter().sum::<f64>() / self.len() as f64;
        let track = self.track_with(&[]);
        Ok(Tensor::finish(vec![], vec![m], track, Op::Mean(self.clone())))
    }

    /// Sum over all elements → scalar.
    pub fn sum(&self) -> Result<Tensor> {
        let s = self.data_ref().iter().sum::<f64>();
        let track = self.track_with(&[]);
        Ok(Tensor::finish(vec![], vec![s], track, Op::Sum(self.clone())))
    }

    /// Rows `[start, start + rows)` of a 2-D tensor. Gradients scatter back
    /// into the source rows.
    pub fn row_slice(&self, start: usize, rows: usize) -> Result<Tensor> {
        self.check_matrix("row_slice")?;
        if start + rows > self.rows() {
            return Err(CoreError::shape(
                "row_slice",
                format!(
                    "rows [{start}, {}) out of bounds for {} rows",
                    start + rows,
                    self.rows()
                ),
            ));
        }
        let cols = self.cols();
        let data = self.data_ref()[start * cols..(start + rows) * cols].to_vec();
        let track = self.track_with(&[]);
        Ok(Tensor::finish(
            vec![rows, cols],
            data,
            track,
            Op::RowSlice { x: self.clone(), start },
        ))
    }

    /// Per-column variance along the batch axis of an `[n×u]` tensor.
    /// Divisor is `n − 1` when `unbiased`, else `n`.
    pub fn batch_variance(&self, unbiased: bool) -> Result<Tensor> {
        self.check_matrix("batch_variance")?;
        let (n, u) = (self.rows(), self.cols());
        if n < 2 {
            return Err(CoreError::invalid(format!(
                "batch variance needs at least 2 rows, got {n}"
            )));
        }
        let xd = self.data_ref();
        let mut mean = vec![0.0; u];
        for i in 0..n {
            for j in 0..u {
                mean[j] += xd[i * u + j];
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let divisor = if unbiased { n as f64 - 1.0 } else { n as f64 };
        let mut var = vec![0.0; u];
        for i in 0..n {
            for j in 0..u {
                let d = xd[i * u + j] - mean[j];
                var[j] += d * d;
            }
        }
        for v in var.iter_mut() {
            *v /= divisor;
        }
        drop(xd);
        let track = self.track_with(&[]);
        Ok(Tensor::finish(
            vec![u],
            var,
            track,
            Op::BatchVariance { x: self.clone(), divisor, mean },
        ))
    }

    /// Mean softmax cross-entropy of `[n×c]` logits against integer labels.
    pub fn softmax_cross_entropy(&self, labels: &[usize]) -> Result<Tensor> {
        self.check_matrix("softmax_cross_entropy")?;
        let (n, c) = (self.rows(), self.cols());
        if labels.len() != n {
            return Err(CoreError::shape(
                "softmax_cross_entropy",
                format!("{n} rows vs {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(CoreError::invalid(format!(
                "label {bad} out of range for {c} classes"
            )));
        }
        let xd = self.data_ref();
        let mut probs = vec![0.0; n * c];
        let mut total = 0.0;
        for i in 0..n {
            let row = &xd[i * c..(i + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..c {
                let e = (row[j] - max).exp();
                probs[i * c + j] = e;
                z += e;
            }
            for j in 0..c {
                probs[i * c + j] /= z;
            }
            total += z.ln() + max - row[labels[i]];
        }
        drop(xd);
        let loss = total / n as f64;
        let track = self.track_with(&[]);
        Ok(Tensor::finish(
            vec![],
            vec![loss],
            track,
            Op::SoftmaxCrossEntropy {
                logits: self.clone(),
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Training-mode batch normalization of an `[n×u]` tensor: per-column
    /// standardization with biased batch variance plus `eps`, then
    /// `gamma ∘ x̂ + shift`. Also returns the batch mean and biased batch
    /// variance so the caller can maintain running statistics.
    pub fn batchnorm_train(
        &self,
        gamma: &Tensor,
        shift: &Tensor,
        eps: f64,
    ) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
        self.check_row(gamma, "batchnorm")?;
        self.check_row(shift, "batchnorm")?;
        let (n, u) = (self.rows(), self.cols());
        if n < 2 {
            return Err(CoreError::invalid(format!(
                "batchnorm training needs at least 2 rows, got {n}"
            )));
        }
        let xd = self.data_ref();
        let mut mean = vec![0.0; u];
        for i in 0..n {
            for j in 0..u {
                mean[j] += xd[i * u + j];
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let mut var = vec![0.0; u];
        for i in 0..n {
            for j in 0..u {
                let d = xd[i * u + j] - mean[j];
                var[j] += d * d;
            }
        }
        for v in var.iter_mut() {
            *v /= n as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
        let gd = gamma.data_ref();
        let sd = shift.data_ref();
        let mut out = vec![0.0; n * u];
        for i in 0..n {
            for j in 0..u {
                let idx = i * u + j;
                out[idx] = gd[j] * (xd[idx] - mean[j]) * inv_std[j] + sd[j];
            }
        }
        drop(xd);
        drop(gd);
        drop(sd);
        let track = self.track_with(&[gamma, shift]);
        let tensor = Tensor::finish(
            vec![n, u],
            out,
            track,
            Op::BatchNorm {
                x: self.clone(),
                gamma: gamma.clone(),
                shift: shift.clone(),
                mean: mean.clone(),
                inv_std,
            },
        );
        Ok((tensor, mean, var))
    }

    /// Per-row normalization across features of an `[n×u]` tensor, then
    /// `gamma ∘ x̂ + shift`. Requires `u ≥ 2`.
    pub fn layernorm(&self, gamma: &Tensor, shift: &Tensor, eps: f64) -> Result<Tensor> {
        self.check_row(gamma, "layernorm")?;
        self.check_row(shift, "layernorm")?;
        let (n, u) = (self.rows(), self.cols());
        if u < 2 {
            return Err(CoreError::invalid(format!(
                "layernorm needs at least 2 features, got {u}"
            )));
        }
        let xd = self.data_ref();
        let mut mean = vec![0.0; n];
        let mut inv_std = vec![0.0; n];
        for i in 0..n {
            let row = &xd[i * u..(i + 1) * u];
            let m = row.iter().sum::<f64>() / u as f64;
            let v = row.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / u as f64;
            mean[i] = m;
            inv_std[i] = 1.0 / (v + eps).sqrt();
        }
        let gd = gamma.data_ref();
        let sd = shift.data_ref();
        let mut out = vec![0.0; n * u];
        for i in 0..n {
            for j in 0..u {
                let idx = i * u + j;
                out[idx] = gd[j] * (xd[idx] - mean[i]) * inv_std[i] + sd[j];
            }
        }
        drop(xd);
        drop(gd);
        drop(sd);
        let track = self.track_with(&[gamma, shift]);
        Ok(Tensor::finish(
            vec![n, u],
            out,
            track,
            Op::LayerNorm {
                x: self.clone(),
                gamma: gamma.clone(),
                shift: shift.clone(),
                mean,
                inv_std,
            },
        ))
    }

    /// `y_i = scale_i · x_i + offset_i` with fixed coefficient buffers
    /// (dropout masks). Differentiable w.r.t. `x` only.
    pub fn elementwise_affine(&self, scale: &[f64], offset: &[f64]) -> Result<Tensor> {
        if scale.len() != self.len() || offset.len() != self.len() {
            return Err(CoreError::shape(
                "elementwise_affine",
                format!(
                    "tensor len {} vs scale {} / offset {}",
                    self.len(),
                    scale.len(),
                    offset.len()
                ),
            ));
        }
        let data: Vec<f64> = self
            .data_ref()
            .iter()
            .zip(scale.iter().zip(offset.iter()))
            .map(|(&x, (&s, &o))| s * x + o)
            .collect();
        let track = self.track_with(&[]);
        Ok(Tensor::finish(
            self.shape().to_vec(),
            data,
            track,
            Op::ElementwiseAffine { x: self.clone(), scale: scale.to_vec() },
        ))
    }
}
