//! A fully-connected classifier: hidden blocks (dense → optional norm →
//! activation → optional dropout) followed by a linear output layer.

use super::{
    dropout, Activation, BatchNormLayer, DenseLayer, DropoutKind, LayerNormLayer, Mode,
};
use crate::error::{CoreError, Result};
use crate::tensor::Tensor;
use rand::Rng;

/// Which normalization the hidden blocks carry. `Vcl` means none here: the
/// regularizer is a loss term handled by the trainer, not a wired-in layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalizer {
    None,
    BatchNorm,
    LayerNorm,
    Vcl,
}

impl Normalizer {
    pub fn parse(name: &str) -> Result<Normalizer> {
        Ok(match name {
            "none" => Normalizer::None,
            "batchnorm" => Normalizer::BatchNorm,
            "layernorm" => Normalizer::LayerNorm,
            "vcl" => Normalizer::Vcl,
            other => return Err(CoreError::Config(format!("unknown normalizer '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Normalizer::None => "none",
            Normalizer::BatchNorm => "batchnorm",
            Normalizer::LayerNorm => "layernorm",
            Normalizer::Vcl => "vcl",
        }
    }
}

/// Where dropout is inserted among the hidden blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutPlacement {
    AllHidden,
    LastHidden,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub kind: DropoutKind,
    pub rate: f64,
    pub placement: DropoutPlacement,
}

/// Architecture description used to build an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: Activation,
    pub normalizer: Normalizer,
    pub dropout: Option<DropoutSpec>,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 {
            return Err(CoreError::Config(
                "model needs a nonzero input dimension and at least 2 classes".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(CoreError::Config("hidden widths must be nonzero".into()));
        }
        if let Some(d) = &self.dropout {
            if !(0.0..1.0).contains(&d.rate) {
                return Err(CoreError::Config(format!(
                    "dropout rate must lie in [0,1), got {}",
                    d.rate
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum Norm {
    Batch(BatchNormLayer),
    Layer(LayerNormLayer),
}

/// One hidden block.
#[derive(Debug)]
pub struct Block {
    pub dense: DenseLayer,
    pub norm: Option<Norm>,
}

/// The full network.
#[derive(Debug)]
pub struct Mlp {
    pub blocks: Vec<Block>,
    pub output: DenseLayer,
    pub normalizer: Normalizer,
    pub dropout: Option<DropoutSpec>,
}

impl Mlp {
    pub fn new<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Result<Mlp> {
        spec.validate()?;
        let mut blocks = Vec::with_capacity(spec.hidden.len());
        let mut in_dim = spec.input_dim;
        for &width in &spec.hidden {
            let dense = DenseLayer::new(in_dim, width, spec.activation, rng)?;
            let norm = match spec.normalizer {
                Normalizer::BatchNorm => Some(Norm::Batch(BatchNormLayer::with_defaults(width)?)),
                Normalizer::LayerNorm => Some(Norm::Layer(LayerNormLayer::with_defaults(width)?)),
                Normalizer::None | Normalizer::Vcl => None,
            };
            blocks.push(Block { dense, norm });
            in_dim = width;
        }
        let output = DenseLayer::new(in_dim, spec.classes, Activation::Linear, rng)?;
        Ok(Mlp {
            blocks,
            output,
            normalizer: spec.normalizer,
            dropout: spec.dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.blocks
            .first()
            .map(|b| b.dense.in_dim())
            .unwrap_or_else(|| self.output.in_dim())
    }

    pub fn classes(&self) -> usize {
        self.output.out_dim()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dense.out_dim()).collect()
    }

    fn set_norm_mode(&self, mode: Mode) {
        for block in &self.blocks {
            if let Some(Norm::Batch(bn)) = &block.norm {
                bn.set_mode(mode);
            }
        }
    }

    /// Forward pass producing logits. `rng` is consulted only when dropout
    /// is active (train mode with a dropout spec).
    pub fn forward<R: Rng>(
        &self,
        x: &Tensor,
        mode: Mode,
        mut rng: Option<&mut R>,
    ) -> Result<Tensor> {
        self.set_norm_mode(mode);
        let last = self.blocks.len().saturating_sub(1);
        let mut h = x.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let pre = block.dense.affine(&h)?;
            let normed = match &block.norm {
                Some(Norm::Batch(bn)) => bn.forward(&pre)?,
                Some(Norm::Layer(ln)) => ln.forward(&pre)?,
                None => pre,
            };
            h = block.dense.activation.apply(&normed);
            if let Some(spec) = &self.dropout {
                let here = match spec.placement {
                    DropoutPlacement::AllHidden => true,
                    DropoutPlacement::LastHidden => i == last,
                };
                if here && mode == Mode::Train {
                    let rng = rng.as_deref_mut().ok_or_else(|| {
                        CoreError::invalid("dropout in train mode needs an RNG")
                    })?;
                    h = dropout(&h, spec.rate, mode, spec.kind, rng)?;
                }
            }
        }
        self.output.affine(&h)
    }

    /// Eval-mode forward without dropout RNG plumbing.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        self.forward::<rand_chacha::ChaCha8Rng>(x, Mode::Eval, None)
    }

    /// Pre-activation caches of the hidden blocks after a forward pass.
    pub fn hidden_pre_activations(&self) -> Vec<Tensor> {
        self.blocks
            .iter()
            .filter_map(|b| b.dense.last_pre_activation())
            .collect()
    }

    /// Trainable tensors grouped by layer, hidden blocks first, output last.
    /// Gradient clipping operates on these groups.
    pub fn layer_param_groups(&self) -> Vec<Vec<Tensor>> {
        let mut groups = Vec::with_capacity(self.blocks.len() + 1);
        for block in &self.blocks {
            let mut group = vec![block.dense.weight.clone(), block.dense.bias.clone()];
            match &block.norm {
                Some(Norm::Batch(bn)) => {
                    group.push(bn.gamma.clone());
                    group.push(bn.shift.clone());
                }
                Some(Norm::Layer(ln)) => {
                    group.push(ln.gamma.clone());
                    group.push(ln.shift.clone());
                }
                None => {}
            }
            groups.push(group);
        }
        groups.push(vec![self.output.weight.clone(), self.output.bias.clone()]);
        groups
    }

    /// Flat list of every trainable tensor.
    pub fn all_params(&self) -> Vec<Tensor> {
        self.layer_param_groups().into_iter().flatten().collect()
    }

    /// Class predictions by logit argmax.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = crate::tensor::no_grad(|| self.forward_eval(x))?;
        let (n, c) = (logits.rows(), logits.cols());
        let data = logits.values();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let row = &data[i * c..(i + 1) * c];
            let mut best = 0;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            out.push(best);
        }
        Ok(out)
    }
}
