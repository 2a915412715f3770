//! The variance constancy loss: a per-neuron regularizer
//! `(1 − σ²_{s1}/(σ²_{s2} + β))²` over two consecutive subsets of the SGD
//! minibatch, with a learnable stabilizer β per neuron, per-layer averaging,
//! and a global weight γ.

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;

/// Threshold below which `σ²_{s2} + β` is treated as a training pathology.
const DEGENERATE_DENOMINATOR: f64 = 1e-8;

/// Hyperparameters of the regularizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VclConfig {
    /// Subset size; two consecutive subsets of this size are taken from the
    /// front of each minibatch, so `2n` must not exceed the batch size.
    pub n: usize,
    /// Weight applied to the summed per-layer losses.
    pub gamma: f64,
    /// Initial value of every per-neuron β.
    pub beta_init: f64,
}

impl Default for VclConfig {
    fn default() -> Self {
        VclConfig { n: 2, gamma: 0.01, beta_init: 1.0 }
    }
}

impl VclConfig {
    pub fn validate(&self, batch_size: usize) -> Result<()> {
        if self.n < 2 {
            return Err(CoreError::Config(format!(
                "subset size must be at least 2, got {}",
                self.n
            )));
        }
        if 2 * self.n > batch_size {
            return Err(CoreError::Config(format!(
                "two subsets of size {} need a batch of at least {}, got {}",
                self.n,
                2 * self.n,
                batch_size
            )));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(CoreError::Config(format!(
                "loss weight must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if self.beta_init <= 0.0 || !self.beta_init.is_finite() {
            return Err(CoreError::Config(format!(
                "beta must start positive, got {}",
                self.beta_init
            )));
        }
        Ok(())
    }
}

/// Learnable per-neuron stabilizers for one layer. β joins the same
/// optimizer step as the layer weights and is not re-clamped after
/// initialization.
#[derive(Debug, Clone)]
pub struct VclUnitState {
    pub beta: Tensor,
}

impl VclUnitState {
    pub fn new(units: usize, beta_init: f64) -> Result<Self> {
        if units == 0 {
            return Err(CoreError::invalid("layer must have at least one unit"));
        }
        Ok(VclUnitState {
            beta: Tensor::param(&[units], vec![beta_init; units])?,
        })
    }

    pub fn units(&self) -> usize {
        self.beta.len()
    }
}

/// The first two consecutive size-`n` row blocks of a minibatch of
/// pre-activations. Rows beyond `2n` are unused by the loss; gradients flow
/// back to the original rows.
pub fn split_minibatch(pre_act: &Tensor, n: usize) -> Result<(Tensor, Tensor)> {
    if pre_act.shape().len() != 2 {
        return Err(CoreError::shape(
            "split_minibatch",
            format!("expected [batch × units], got {:?}", pre_act.shape()),
        ));
    }
    let batch = pre_act.rows();
    if batch < 2 * n {
        return Err(CoreError::Config(format!(
            "batch of {batch} rows cannot supply two subsets of size {n}"
        )));
    }
    Ok((pre_act.row_slice(0, n)?, pre_act.row_slice(n, n)?))
}

/// Per-neuron loss `(1 − σ²_{s1}/(σ²_{s2} + β))²` with unbiased sample
/// variances; differentiable w.r.t. both subsets and β. Returns a length-`u`
/// tensor. A denominator at or below `1e−8` is reported as a diagnostic
/// error rather than silently clamped.
pub fn vcl_unit_loss(s1: &Tensor, s2: &Tensor, beta: &Tensor) -> Result<Tensor> {
    if s1.shape() != s2.shape() {
        return Err(CoreError::shape(
            "vcl_unit_loss",
            format!("{:?} vs {:?}", s1.shape(), s2.shape()),
        ));
    }
    let v1 = s1.batch_variance(true)?;
    let v2 = s2.batch_variance(true)?;
    let denom = v2.add(beta)?;
    if let Some(&d) = denom.data_ref().iter().find(|&&d| d <= DEGENERATE_DENOMINATOR) {
        return Err(CoreError::Numerical(format!(
            "degenerate variance denominator {d}; beta has collapsed"
        )));
    }
    let ratio = v1.div(&denom)?;
    ratio.rsub_scalar(1.0).square()
}

/// Mean of the per-neuron losses of one layer: split the minibatch, apply
/// [`vcl_unit_loss`], and average over units. Returns a scalar tensor.
pub fn vcl_layer_loss(pre_act: &Tensor, state: &VclUnitState, cfg: &VclConfig) -> Result<Tensor> {
    if pre_act.cols() != state.units() {
        return Err(CoreError::shape(
            "vcl_layer_loss",
            format!("{} units vs beta of {}", pre_act.cols(), state.units()),
        ));
    }
    let (s1, s2) = split_minibatch(pre_act, cfg.n)?;
    vcl_unit_loss(&s1, &s2, &state.beta)?.mean()
}

/// `γ · Σ layer losses` over the per-layer scalar losses.
pub fn vcl_total_loss(layer_losses: &[Tensor], gamma: f64) -> Result<Tensor> {
    let mut iter = layer_losses.iter();
    let first = iter
        .next()
        .ok_or_else(|| CoreError::invalid("no layer losses to aggregate"))?;
    let mut total = first.clone();
    for loss in iter {
        total = total.add(loss)?;
    }
    Ok(total.mul_scalar(gamma))
}

/// Population value of the constancy objective `E[(1 − σ²_s/σ²)²]` for a
/// distribution with kurtosis `κ`: `κ/n − (n−3)/(n(n−1))`.
pub fn population_vcl(kappa: f64, n: usize) -> Result<f64> {
    if kappa < 1.0 {
        return Err(CoreError::invalid(format!(
            "kurtosis is bounded below by 1, got {kappa}"
        )));
    }
    if n < 2 {
        return Err(CoreError::invalid(format!("sample size must be >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(kappa / nf - (nf - 3.0) / (nf * (nf - 1.0)))
}
