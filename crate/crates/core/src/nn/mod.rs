//! Fully-connected layers, batch/layer normalization baselines, and dropout.
//!
//! Dense layers cache their pre-activations on every forward pass; the cache
//! is part of the autodiff graph, which is how the variance constancy loss
//! reaches the weights. Normalization, when configured, is applied to the
//! pre-activations, before the nonlinearity.

mod io;
mod model;

pub use io::{load_model, save_model};
pub use model::{Block, DropoutPlacement, DropoutSpec, Mlp, MlpSpec, Norm, Normalizer};

use crate::error::{CoreError, Result};
use crate::tensor::Tensor;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::cell::{Cell, RefCell};

/// Forward-pass mode. Batch normalization and dropout behave differently in
/// the two modes; everything else ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Activation applied after a dense layer (and after normalization, when
/// present). The leaky slope is fixed at 0.2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    LeakyRelu,
    Elu,
    Selu,
}

pub const LEAKY_SLOPE: f64 = 0.2;

impl Activation {
    pub fn apply(&self, x: &Tensor) -> Tensor {
        match self {
            Activation::Linear => x.clone(),
            Activation::Relu => x.relu(),
            Activation::LeakyRelu => x.leaky_relu(LEAKY_SLOPE),
            Activation::Elu => x.elu(),
            Activation::Selu => x.selu(),
        }
    }

    pub fn tag(&self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::LeakyRelu => 2,
            Activation::Elu => 3,
            Activation::Selu => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Activation> {
        Ok(match tag {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::LeakyRelu,
            3 => Activation::Elu,
            4 => Activation::Selu,
            other => return Err(CoreError::Data(format!("unknown activation tag {other}"))),
        })
    }

    pub fn parse(name: &str) -> Result<Activation> {
        Ok(match name {
            "linear" => Activation::Linear,
            "relu" => Activation::Relu,
            "leaky_relu" => Activation::LeakyRelu,
            "elu" => Activation::Elu,
            "selu" => Activation::Selu,
            other => return Err(CoreError::Config(format!("unknown activation '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Elu => "elu",
            Activation::Selu => "selu",
        }
    }
}

/// Dense affine layer with a pre-activation cache.
#[derive(Debug)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
    cache: RefCell<Option<Tensor>>,
}

impl DenseLayer {
    /// Random initialization: weights `N(0, 1/in_dim)`, biases zero.
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        let sd = 1.0 / (in_dim as f64).sqrt();
        let weight: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * sd
            })
            .collect();
        Ok(DenseLayer {
            weight: Tensor::param(&[in_dim, out_dim], weight)?,
            bias: Tensor::param(&[out_dim], vec![0.0; out_dim])?,
            activation,
            cache: RefCell::new(None),
        })
    }

    pub fn from_params(
        in_dim: usize,
        out_dim: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        Ok(DenseLayer {
            weight: Tensor::param(&[in_dim, out_dim], weight)?,
            bias: Tensor::param(&[out_dim], bias)?,
            activation,
            cache: RefCell::new(None),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    /// `x·W + b` for `[N×in]` input; the result is cached as this layer's
    /// pre-activation and stays in the autodiff graph.
    pub fn affine(&self, x: &Tensor) -> Result<Tensor> {
        let pre = x.matmul(&self.weight)?.add_row(&self.bias)?;
        *self.cache.borrow_mut() = Some(pre.clone());
        Ok(pre)
    }

    /// Affine map followed by this layer's activation.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let pre = self.affine(x)?;
        Ok(self.activation.apply(&pre))
    }

    /// Pre-activations of the most recent forward pass.
    pub fn last_pre_activation(&self) -> Option<Tensor> {
        self.cache.borrow().clone()
    }
}

/// Batch normalization over the batch axis with running statistics for
/// evaluation. Train mode uses the biased batch variance; the running
/// variance keeps the unbiased correction.
#[derive(Debug)]
pub struct BatchNormLayer {
    pub gamma: Tensor,
    pub shift: Tensor,
    running_mean: RefCell<Vec<f64>>,
    running_var: RefCell<Vec<f64>>,
    pub momentum: f64,
    pub eps: f64,
    mode: Cell<Mode>,
}

impl BatchNormLayer {
    pub fn new(units: usize, momentum: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) || momentum == 0.0 {
            return Err(CoreError::Config(format!(
                "batchnorm momentum must lie in (0,1), got {momentum}"
            )));
        }
        if eps <= 0.0 {
            return Err(CoreError::Config(format!("batchnorm eps must be positive, got {eps}")));
        }
        Ok(BatchNormLayer {
            gamma: Tensor::param(&[units], vec![1.0; units])?,
            shift: Tensor::param(&[units], vec![0.0; units])?,
            running_mean: RefCell::new(vec![0.0; units]),
            running_var: RefCell::new(vec![1.0; units]),
            momentum,
            eps,
            mode: Cell::new(Mode::Train),
        })
    }

    pub fn with_defaults(units: usize) -> Result<Self> {
        BatchNormLayer::new(units, 0.1, 1e-5)
    }

    pub fn set_mode(&self, mode: Mode) {
        self.mode.set(mode);
    }

    pub fn mode(&self) -> Mode {
        self.mode.get()
    }

    pub fn running_stats(&self) -> (Vec<f64>, Vec<f64>) {
        (self.running_mean.borrow().clone(), self.running_var.borrow().clone())
    }

    pub fn set_running_stats(&self, mean: Vec<f64>, var: Vec<f64>) -> Result<()> {
        if mean.len() != self.gamma.len() || var.len() != self.gamma.len() {
            return Err(CoreError::shape("batchnorm", "running stat length mismatch"));
        }
        if var.iter().any(|&v| v < 0.0) {
            return Err(CoreError::invalid("running variance must be nonnegative"));
        }
        *self.running_mean.borrow_mut() = mean;
        *self.running_var.borrow_mut() = var;
        Ok(())
    }

    /// Train mode: normalize by batch statistics and update the running
    /// averages. Eval mode: normalize by the running statistics only.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        match self.mode.get() {
            Mode::Train => {
                let n = x.rows();
                let (out, batch_mean, batch_var) =
                    x.batchnorm_train(&self.gamma, &self.shift, self.eps)?;
                let m = self.momentum;
                let unbias = n as f64 / (n as f64 - 1.0);
                {
                    let mut rm = self.running_mean.borrow_mut();
                    for (r, b) in rm.iter_mut().zip(&batch_mean) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                }
                {
                    let mut rv = self.running_var.borrow_mut();
                    for (r, b) in rv.iter_mut().zip(&batch_var) {
                        *r = (1.0 - m) * *r + m * b * unbias;
                    }
                }
                Ok(out)
            }
            Mode::Eval => {
                let rm = self.running_mean.borrow();
                let rv = self.running_var.borrow();
                let mean = Tensor::from_vec(&[rm.len()], rm.clone())?;
                let inv_std: Vec<f64> =
                    rv.iter().map(|&v| 1.0 / (v + self.eps).sqrt()).collect();
                let inv = Tensor::from_vec(&[inv_std.len()], inv_std)?;
                x.sub_row(&mean)?
                    .mul_row(&inv)?
                    .mul_row(&self.gamma)?
                    .add_row(&self.shift)
            }
        }
    }
}

/// Per-row normalization across features.
#[derive(Debug)]
pub struct LayerNormLayer {
    pub gamma: Tensor,
    pub shift: Tensor,
    pub eps: f64,
}

impl LayerNormLayer {
    pub fn new(units: usize, eps: f64) -> Result<Self> {
        if eps <= 0.0 {
            return Err(CoreError::Config(format!("layernorm eps must be positive, got {eps}")));
        }
        Ok(LayerNormLayer {
            gamma: Tensor::param(&[units], vec![1.0; units])?,
            shift: Tensor::param(&[units], vec![0.0; units])?,
            eps,
        })
    }

    pub fn with_defaults(units: usize) -> Result<Self> {
        LayerNormLayer::new(units, 1e-5)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.layernorm(&self.gamma, &self.shift, self.eps)
    }
}

/// Free-function layer normalization, for callers without a layer object.
pub fn layernorm_forward(x: &Tensor, gamma: &Tensor, shift: &Tensor, eps: f64) -> Result<Tensor> {
    x.layernorm(gamma, shift, eps)
}

/// Dropout flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutKind {
    /// Inverted dropout: kept units scaled by `1/(1−rate)` in train mode.
    Standard,
    /// SeLU-compatible dropout: dropped units are set to the SeLU negative
    /// saturation value and the output is affinely corrected to preserve
    /// mean and variance.
    Alpha,
}

impl DropoutKind {
    pub fn parse(name: &str) -> Result<DropoutKind> {
        Ok(match name {
            "standard" => DropoutKind::Standard,
            "alpha" => DropoutKind::Alpha,
            other => return Err(CoreError::Config(format!("unknown dropout kind '{other}'"))),
        })
    }
}

/// Applies dropout to `x`. Identity when `rate == 0` or in eval mode.
pub fn dropout<R: Rng>(
    x: &Tensor,
    rate: f64,
    mode: Mode,
    kind: DropoutKind,
    rng: &mut R,
) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(CoreError::invalid(format!("dropout rate must lie in [0,1), got {rate}")));
    }
    if rate == 0.0 || mode == Mode::Eval {
        return Ok(x.clone());
    }
    let len = x.len();
    let keep = 1.0 - rate;
    let mut scale = vec![0.0; len];
    let mut offset = vec![0.0; len];
    match kind {
        DropoutKind::Standard => {
            let boost = 1.0 / keep;
            for s in scale.iter_mut() {
                if rng.gen_bool(keep) {
                    *s = boost;
                }
            }
        }
        DropoutKind::Alpha => {
            use crate::tensor::selu_saturation;
            let neg = selu_saturation();
            let a = (keep + neg * neg * keep * rate).powf(-0.5);
            let b = -a * rate * neg;
            for i in 0..len {
                if rng.gen_bool(keep) {
                    scale[i] = a;
                    offset[i] = b;
                } else {
                    offset[i] = a * neg + b;
                }
            }
        }
    }
    x.elementwise_affine(&scale, &offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::seeded_rng;

    #[test]
    fn dense_zero_weights_give_zero_cache() {
        let layer = DenseLayer::from_params(2, 3, vec![0.0; 6], vec![0.0; 3], Activation::Relu)
            .unwrap();
        let x = Tensor::matrix(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        let out = layer.forward(&x).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        assert!(layer.last_pre_activation().unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dense_one_by_one_identity() {
        let layer =
            DenseLayer::from_params(1, 1, vec![1.0], vec![0.0], Activation::Elu).unwrap();
        let x = Tensor::matrix(1, 1, vec![-0.5]).unwrap();
        let out = layer.forward(&x).unwrap();
        assert!((out.item() - ((-0.5f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn dense_matches_naive_recomputation() {
        let mut rng = seeded_rng(3);
        let layer = DenseLayer::new(3, 2, Activation::Linear, &mut rng).unwrap();
        let x = Tensor::matrix(4, 3, (0..12).map(|i| i as f64 * 0.3 - 1.0).collect()).unwrap();
        let out = layer.forward(&x).unwrap().values();
        let w = layer.weight.values();
        let b = layer.bias.values();
        let xv = x.values();
        for i in 0..4 {
            for j in 0..2 {
                let mut want = b[j];
                for l in 0..3 {
                    want += xv[i * 3 + l] * w[l * 2 + j];
                }
                assert!((out[i * 2 + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batchnorm_unit_normalizes_two_point_batch() {
        let bn = BatchNormLayer::new(1, 0.1, 1e-12).unwrap();
        let x = Tensor::matrix(2, 1, vec![0.0, 2.0]).unwrap();
        let out = bn.forward(&x).unwrap().values();
        assert!((out[0] + 1.0).abs() < 1e-5);
        assert!((out[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn batchnorm_eval_uses_running_stats_only() {
        let bn = BatchNormLayer::with_defaults(2).unwrap();
        bn.set_running_stats(vec![1.0, -1.0], vec![4.0, 0.25]).unwrap();
        bn.set_mode(Mode::Eval);
        let x = Tensor::matrix(1, 2, vec![3.0, 0.0]).unwrap();
        let out = bn.forward(&x).unwrap().values();
        // (3−1)/2 and (0+1)/0.5, up to eps.
        assert!((out[0] - 2.0 / (4.0f64 + 1e-5).sqrt() * 2.0 / 2.0).abs() < 1e-6);
        assert!((out[1] - 1.0 / (0.25f64 + 1e-5).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn batchnorm_train_rejects_single_row() {
        let bn = BatchNormLayer::with_defaults(2).unwrap();
        let x = Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(bn.forward(&x).is_err());
    }

    #[test]
    fn layernorm_row_normalization() {
        let ln = LayerNormLayer::new(2, 1e-12).unwrap();
        let x = Tensor::matrix(1, 2, vec![0.0, 2.0]).unwrap();
        let out = ln.forward(&x).unwrap().values();
        assert!((out[0] + 1.0).abs() < 1e-5);
        assert!((out[1] - 1.0).abs() < 1e-5);
        // Constant row stays finite thanks to eps.
        let c = Tensor::matrix(1, 2, vec![3.0, 3.0]).unwrap();
        let out = ln.forward(&c).unwrap().values();
        assert!(out.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = seeded_rng(1);
        let x = Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let same = dropout(&x, 0.0, Mode::Train, DropoutKind::Standard, &mut rng).unwrap();
        assert_eq!(same.values(), x.values());
        let eval = dropout(&x, 0.9, Mode::Eval, DropoutKind::Standard, &mut rng).unwrap();
        assert_eq!(eval.values(), x.values());
    }

    #[test]
    fn dropout_keeps_half_and_preserves_mean() {
        let mut rng = seeded_rng(2);
        let n = 100_000;
        let x = Tensor::from_vec(&[n], vec![1.0; n]).unwrap();
        let out = dropout(&x, 0.5, Mode::Train, DropoutKind::Standard, &mut rng).unwrap();
        let vals = out.values();
        let kept = vals.iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((kept - 0.5).abs() < 0.02, "kept fraction {kept}");
        let mean = vals.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }
}
