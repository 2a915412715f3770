//! Deterministic SGD training: classical momentum with weight decay folded
//! into the gradient, a breakpoint learning-rate schedule, per-layer
//! gradient clipping, task loss plus the optional variance constancy loss,
//! and smoothed validation selection.

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::nn::{Mlp, Mode, Normalizer};
use crate::stats::{compute_moments, seeded_rng};
use crate::tensor::{no_grad, Tensor};
use crate::vcl::{vcl_layer_loss, vcl_total_loss, VclConfig, VclUnitState};
use rand::seq::SliceRandom;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Full training determinism lives here: a fixed seed fixes the shuffles,
/// the dropout masks, and therefore every arithmetic step.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// `(epoch, rate)` breakpoints, strictly increasing, first at epoch 0.
    /// The rate at epoch `e` is the last breakpoint at or before `e`.
    pub lr_schedule: Vec<(usize, f64)>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub vcl: Option<VclConfig>,
    pub normalizer: Normalizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 20,
            epochs: 100,
            lr_schedule: vec![(0, 0.01)],
            momentum: 0.9,
            weight_decay: 1e-4,
            clip_norm: 1.0,
            seed: 0,
            vcl: None,
            normalizer: Normalizer::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(CoreError::Config(format!(
                "batch size must be at least 2, got {}",
                self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(CoreError::Config("at least one epoch required".into()));
        }
        if self.lr_schedule.is_empty() || self.lr_schedule[0].0 != 0 {
            return Err(CoreError::Config(
                "learning-rate schedule must start with a breakpoint at epoch 0".into(),
            ));
        }
        for pair in self.lr_schedule.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(CoreError::Config(
                    "learning-rate breakpoints must be strictly increasing".into(),
                ));
            }
        }
        if self.lr_schedule.iter().any(|&(_, r)| r <= 0.0 || !r.is_finite()) {
            return Err(CoreError::Config("learning rates must be positive".into()));
        }
        if self.clip_norm <= 0.0 {
            return Err(CoreError::Config("clip norm must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CoreError::Config(format!(
                "momentum must lie in [0,1), got {}",
                self.momentum
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(CoreError::Config("weight decay must be nonnegative".into()));
        }
        match (self.normalizer, &self.vcl) {
            (Normalizer::Vcl, Some(vcl)) => vcl.validate(self.batch_size)?,
            (Normalizer::Vcl, None) => {
                return Err(CoreError::Config(
                    "normalizer 'vcl' needs a vcl configuration".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(CoreError::Config(
                    "vcl configuration given but normalizer is not 'vcl'".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// Rate in force at `epoch`: the last breakpoint at or before it.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut rate = self.lr_schedule[0].1;
        for &(e, r) in &self.lr_schedule {
            if e <= epoch {
                rate = r;
            } else {
                break;
            }
        }
        rate
    }
}

/// One completed epoch.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_err: f64,
    pub val_err: f64,
    pub mean_kurtosis: f64,
    pub seconds: f64,
    pub clip_events: u64,
}

/// Training outcome: per-epoch records plus the smoothed-selection result.
#[derive(Debug)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub total_clip_events: u64,
    pub selected_epoch: usize,
    pub selected_smoothed_val: f64,
    pub vcl_states: Option<Vec<VclUnitState>>,
}

/// Rescales one layer's gradients so their joint L2 norm is at most
/// `max_norm`. Returns true when a rescale happened.
pub fn clip_gradient_group(params: &[Tensor], max_norm: f64) -> bool {
    let mut sq = 0.0;
    for p in params {
        if let Some(g) = p.grad() {
            sq += g.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for p in params {
            p.scale_grad(scale);
        }
        true
    } else {
        false
    }
}

/// Per-layer clipping over all groups; returns how many layers were clipped.
pub fn clip_gradients_per_layer(groups: &[Vec<Tensor>], max_norm: f64) -> u64 {
    groups
        .iter()
        .filter(|group| clip_gradient_group(group, max_norm))
        .count() as u64
}

/// Classical momentum SGD with weight decay added to the gradient:
/// `v ← momentum·v + (g + wd·p)`, `p ← p − lr·v`.
#[derive(Debug)]
pub struct SgdMomentum {
    pub momentum: f64,
    pub weight_decay: f64,
    buffers: HashMap<u64, Vec<f64>>,
}

impl SgdMomentum {
    pub fn new(momentum: f64, weight_decay: f64) -> SgdMomentum {
        SgdMomentum { momentum, weight_decay, buffers: HashMap::new() }
    }

    pub fn step(&mut self, params: &[Tensor], lr: f64) {
        for p in params {
            let Some(grad) = p.grad() else { continue };
            let v = self
                .buffers
                .entry(p.id())
                .or_insert_with(|| vec![0.0; grad.len()]);
            p.update_data(|data| {
                for i in 0..data.len() {
                    v[i] = self.momentum * v[i] + (grad[i] + self.weight_decay * data[i]);
                    data[i] -= lr * v[i];
                }
            });
        }
    }
}

fn error_rate(predictions: &[usize], labels: &[usize]) -> f64 {
    let wrong = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p != l)
        .count();
    wrong as f64 / labels.len().max(1) as f64
}

fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let (n, c) = (logits.rows(), logits.cols());
    let data = logits.values();
    (0..n)
        .map(|i| {
            let row = &data[i * c..(i + 1) * c];
            let mut best = 0;
            for j in 1..c {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Kurtosis of every hidden unit's pre-activations over a dataset, one
/// vector per hidden layer (`None` marks zero-variance units). Runs an
/// eval-mode forward pass.
pub fn hidden_unit_kurtosis(model: &Mlp, ds: &Dataset) -> Result<Vec<Vec<Option<f64>>>> {
    let x = ds.to_tensor()?;
    no_grad(|| model.forward_eval(&x))?;
    let mut out = Vec::new();
    for cache in model.hidden_pre_activations() {
        let (n, u) = (cache.rows(), cache.cols());
        let data = cache.values();
        let mut layer = Vec::with_capacity(u);
        for j in 0..u {
            let column: Vec<f64> = (0..n).map(|i| data[i * u + j]).collect();
            layer.push(compute_moments(&column)?.kurtosis);
        }
        out.push(layer);
    }
    Ok(out)
}

/// Mean over layers of the mean defined per-unit kurtosis; NaN when no unit
/// has a defined kurtosis.
pub fn mean_hidden_kurtosis(per_layer: &[Vec<Option<f64>>]) -> f64 {
    let mut layer_means = Vec::new();
    for layer in per_layer {
        let defined: Vec<f64> = layer.iter().flatten().cloned().collect();
        if !defined.is_empty() {
            layer_means.push(defined.iter().sum::<f64>() / defined.len() as f64);
        }
    }
    if layer_means.is_empty() {
        f64::NAN
    } else {
        layer_means.iter().sum::<f64>() / layer_means.len() as f64
    }
}

/// Trains `model` in place. Fully deterministic for a fixed config and seed
/// (single-threaded).
pub fn train(model: &Mlp, train_ds: &Dataset, val_ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if train_ds.rows() == 0 || val_ds.rows() == 0 {
        return Err(CoreError::Config("train and validation splits must be nonempty".into()));
    }
    if train_ds.dim() != model.input_dim() {
        return Err(CoreError::Config(format!(
            "dataset has {} features but the model expects {}",
            train_ds.dim(),
            model.input_dim()
        )));
    }
    if train_ds.class_count() > model.classes() {
        return Err(CoreError::Config(format!(
            "dataset has {} classes but the model outputs {}",
            train_ds.class_count(),
            model.classes()
        )));
    }
    if train_ds.rows() < cfg.batch_size {
        return Err(CoreError::Config(format!(
            "training split of {} rows is smaller than one batch of {}",
            train_ds.rows(),
            cfg.batch_size
        )));
    }

    let vcl_cfg: Option<VclConfig> = match cfg.normalizer {
        Normalizer::Vcl => cfg.vcl,
        _ => None,
    };
    let vcl_states: Option<Vec<VclUnitState>> = match &vcl_cfg {
        Some(v) => Some(
            model
                .hidden_widths()
                .iter()
                .map(|&w| VclUnitState::new(w, v.beta_init))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    // Per-layer parameter groups for clipping; β joins its layer's group.
    let mut groups = model.layer_param_groups();
    if let Some(states) = &vcl_states {
        for (group, state) in groups.iter_mut().zip(states.iter()) {
            group.push(state.beta.clone());
        }
    }
    let all_params: Vec<Tensor> = groups.iter().flatten().cloned().collect();

    let mut optimizer = SgdMomentum::new(cfg.momentum, cfg.weight_decay);
    let mut rng = seeded_rng(cfg.seed);
    let mut indices: Vec<usize> = (0..train_ds.rows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut total_clips = 0u64;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let lr = cfg.lr_at(epoch);
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut loss_batches = 0usize;
        let mut wrong = 0usize;
        let mut seen = 0usize;
        let mut epoch_clips = 0u64;

        for (batch_idx, chunk) in indices.chunks(cfg.batch_size).enumerate() {
            if let Some(v) = &vcl_cfg {
                // The loss needs both subsets; a too-short trailing batch is dropped.
                if chunk.len() < 2 * v.n {
                    continue;
                }
            }
            let (x, labels) = train_ds.batch(chunk)?;
            let logits = model.forward(&x, Mode::Train, Some(&mut rng))?;
            let task_loss = logits.softmax_cross_entropy(&labels)?;

            let total_loss = match (&vcl_cfg, &vcl_states) {
                (Some(v), Some(states)) => {
                    let mut layer_losses = Vec::with_capacity(states.len());
                    for (cache, state) in model.hidden_pre_activations().iter().zip(states) {
                        layer_losses.push(vcl_layer_loss(cache, state, v)?);
                    }
                    task_loss.add(&vcl_total_loss(&layer_losses, v.gamma)?)?
                }
                _ => task_loss.clone(),
            };

            let loss_value = total_loss.item();
            if !loss_value.is_finite() {
                return Err(CoreError::Numerical(format!(
                    "non-finite loss {loss_value} at epoch {epoch}, batch {batch_idx}"
                )));
            }

            total_loss.backward()?;
            epoch_clips += clip_gradients_per_layer(&groups, cfg.clip_norm);
            optimizer.step(&all_params, lr);
            for p in &all_params {
                p.zero_grad();
            }

            loss_sum += task_loss.item();
            loss_batches += 1;
            let preds = argmax_rows(&logits);
            wrong += preds.iter().zip(&labels).filter(|(p, l)| p != l).count();
            seen += labels.len();
        }

        if loss_batches == 0 {
            return Err(CoreError::Config(
                "no usable batches in an epoch; batch size and subset size exclude all data".into(),
            ));
        }

        let val_preds = model.predict(&val_ds.to_tensor()?)?;
        let val_err = error_rate(&val_preds, val_ds.labels());
        let kurtosis = mean_hidden_kurtosis(&hidden_unit_kurtosis(model, train_ds)?);
        total_clips += epoch_clips;

        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / loss_batches as f64,
            train_err: wrong as f64 / seen.max(1) as f64,
            val_err,
            mean_kurtosis: kurtosis,
            seconds: start.elapsed().as_secs_f64(),
            clip_events: epoch_clips,
        });
    }

    let val_errs: Vec<f64> = history.iter().map(|r| r.val_err).collect();
    let (selected_epoch, selected_smoothed_val) = smoothed_validation_selection(&val_errs, 10)?;

    Ok(TrainReport {
        history,
        total_clip_events: total_clips,
        selected_epoch,
        selected_smoothed_val,
        vcl_states,
    })
}

/// Trailing moving average of the validation errors with window
/// `min(mask, epochs so far)`; returns the argmin epoch (earliest on ties)
/// and its smoothed value.
pub fn smoothed_validation_selection(val_errors: &[f64], mask: usize) -> Result<(usize, f64)> {
    if val_errors.is_empty() {
        return Err(CoreError::invalid("no validation errors to select from"));
    }
    if mask == 0 {
        return Err(CoreError::invalid("mask must be at least 1"));
    }
    let mut best_epoch = 0;
    let mut best_value = f64::INFINITY;
    for i in 0..val_errors.len() {
        let window = mask.min(i + 1);
        let slice = &val_errors[i + 1 - window..=i];
        let smoothed = slice.iter().sum::<f64>() / window as f64;
        if smoothed < best_value {
            best_value = smoothed;
            best_epoch = i;
        }
    }
    Ok((best_epoch, best_value))
}

/// Writes the per-epoch history as a tab-separated table:
/// `epoch  train_loss  train_err  val_err  mean_kurtosis  seconds`.
pub fn write_history_tsv(history: &[EpochRecord], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch\ttrain_loss\ttrain_err\tval_err\tmean_kurtosis\tseconds")?;
    for r in history {
        writeln!(
            f,
            "{}\t{:.12}\t{:.6}\t{:.6}\t{:.12}\t{:.3}",
            r.epoch, r.train_loss, r.train_err, r.val_err, r.mean_kurtosis, r.seconds
        )?;
    }
    f.flush()?;
    Ok(())
}
