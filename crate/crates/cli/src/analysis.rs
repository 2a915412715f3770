//! Measurement routines shared by the subcommands and the acceptance
//! suite: per-unit activation statistics over a dataset and the empirical
//! concentration of batch standard-deviation ratios against the
//! kurtosis-driven bound.

use crate::CmdError;
use rand::Rng;
use vcl_core::data::Dataset;
use vcl_core::nn::{Mlp, Mode, Norm};
use vcl_core::stats::{compute_moments, sample_variance_unbiased, seeded_rng};
use vcl_core::tensor::{no_grad, Tensor};

/// Pre- and post-activation values of the hidden layers over a dataset,
/// one `[rows × units]` column-major-accessible matrix pair per layer.
pub struct LayerActivations {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

/// Runs the dataset through the network in eval mode and collects each
/// hidden layer's pre-activation (affine output) and post-activation
/// (after normalization and the nonlinearity) values per unit.
pub fn collect_layer_activations(model: &Mlp, ds: &Dataset) -> Result<Vec<LayerActivations>, CmdError> {
    let x = ds.to_tensor()?;
    no_grad(|| -> Result<Vec<LayerActivations>, CmdError> {
        let mut h = x;
        let mut out = Vec::with_capacity(model.blocks.len());
        for block in &model.blocks {
            let pre = block.dense.affine(&h)?;
            let normed = match &block.norm {
                Some(Norm::Batch(bn)) => {
                    bn.set_mode(Mode::Eval);
                    bn.forward(&pre)?
                }
                Some(Norm::Layer(ln)) => ln.forward(&pre)?,
                None => pre.clone(),
            };
            let act = block.dense.activation.apply(&normed);
            out.push(LayerActivations {
                pre: columns_of(&pre),
                post: columns_of(&act),
            });
            h = act;
        }
        Ok(out)
    })
}

fn columns_of(t: &Tensor) -> Vec<Vec<f64>> {
    let (n, u) = (t.rows(), t.cols());
    let data = t.values();
    (0..u)
        .map(|j| (0..n).map(|i| data[i * u + j]).collect())
        .collect()
}

/// Histogram of one unit at one stage.
pub struct UnitHistogram {
    pub layer: usize,
    pub unit: usize,
    pub stage: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub kurtosis: Option<f64>,
}

/// Equal-width histogram; a constant column collapses to a single bin.
pub fn histogram(values: &[f64], bins: usize) -> (f64, f64, Vec<u64>) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return (lo, hi, vec![values.len() as u64]);
    }
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    (lo, hi, counts)
}

/// Histograms plus kurtosis for the selected units of the selected hidden
/// layers, both pre- and post-activation.
pub fn activation_histograms(
    model: &Mlp,
    ds: &Dataset,
    bins: usize,
    layers: Option<&[usize]>,
    units: Option<&[usize]>,
) -> Result<Vec<UnitHistogram>, CmdError> {
    if bins == 0 {
        return Err(CmdError::Config("need at least one histogram bin".into()));
    }
    let activations = collect_layer_activations(model, ds)?;
    let layer_indices: Vec<usize> = match layers {
        Some(sel) => sel.to_vec(),
        None => (0..activations.len()).collect(),
    };
    let mut out = Vec::new();
    for &layer in &layer_indices {
        let acts = activations.get(layer).ok_or_else(|| {
            CmdError::Config(format!(
                "layer {layer} out of range ({} hidden layers)",
                activations.len()
            ))
        })?;
        let width = acts.pre.len();
        let unit_indices: Vec<usize> = match units {
            Some(sel) => sel.to_vec(),
            None => (0..width).collect(),
        };
        for &unit in &unit_indices {
            if unit >= width {
                return Err(CmdError::Config(format!(
                    "unit {unit} out of range for layer {layer} of width {width}"
                )));
            }
            for (stage, column) in [("pre", &acts.pre[unit]), ("post", &acts.post[unit])] {
                let (lo, hi, counts) = histogram(column, bins);
                let kurtosis = compute_moments(column)
                    .map(|m| m.kurtosis)
                    .unwrap_or(None);
                out.push(UnitHistogram { layer, unit, stage, lo, hi, counts, kurtosis });
            }
        }
    }
    Ok(out)
}

/// Concentration measurement of one unit at one epsilon.
#[derive(Debug, Clone)]
pub struct UnitConcentration {
    pub layer: usize,
    pub unit: usize,
    pub eps: f64,
    pub kappa: f64,
    /// `1 − (1/ε²)(κ/n − (n−3)/(n(n−1)))`, possibly negative (vacuous).
    pub bound_raw: f64,
    /// The raw bound clamped at 0.
    pub bound: f64,
    /// Fraction of resampled size-`n` batches with `|σ²_s/σ² − 1| ≤ ε`,
    /// equivalently `1/√(1+ε) ≤ σ/σ_s ≤ 1/√(1−ε)`.
    pub empirical: f64,
}

/// Outcome of [`unit_concentrations`].
pub struct ConcentrationReport {
    pub rows: Vec<UnitConcentration>,
    /// Zero-variance units that were skipped, as (layer, unit).
    pub skipped: Vec<(usize, usize)>,
}

/// For each sampled unit, estimates the pre-activation kurtosis over the
/// dataset, then measures how often the variance of a size-`n` batch
/// (resampled with replacement) stays within ε of the population variance,
/// and pairs that frequency with the kurtosis-driven lower bound.
pub fn unit_concentrations(
    model: &Mlp,
    ds: &Dataset,
    n: usize,
    epsilons: &[f64],
    trials: usize,
    max_units_per_layer: usize,
    seed: u64,
) -> Result<ConcentrationReport, CmdError> {
    if n < 2 {
        return Err(CmdError::Config(format!("batch size must be at least 2, got {n}")));
    }
    if trials == 0 {
        return Err(CmdError::Config("need at least one trial".into()));
    }
    if epsilons.iter().any(|&e| !(0.0..1.0).contains(&e) || e == 0.0) {
        return Err(CmdError::Config("epsilons must lie in (0,1)".into()));
    }
    let activations = collect_layer_activations(model, ds)?;
    let nf = n as f64;
    let correction = (nf - 3.0) / (nf * (nf - 1.0));
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut batch = vec![0.0; n];
    for (layer, acts) in activations.iter().enumerate() {
        let width = acts.pre.len();
        for unit in 0..width.min(max_units_per_layer) {
            let column = &acts.pre[unit];
            let moments = compute_moments(column).map_err(|e| CmdError::Run(e.to_string()))?;
            let Some(kappa) = moments.kurtosis else {
                skipped.push((layer, unit));
                continue;
            };
            // Population variance of the empirical distribution (plug-in).
            let rows_f = column.len() as f64;
            let sigma2 = moments.var_unbiased * (rows_f - 1.0) / rows_f;
            if sigma2 <= 0.0 {
                skipped.push((layer, unit));
                continue;
            }
            // One resampling stream per unit, shared across epsilons so the
            // same batches are judged at every tolerance.
            let mut ratios = Vec::with_capacity(trials);
            for _ in 0..trials {
                for slot in batch.iter_mut() {
                    *slot = column[rng.gen_range(0..column.len())];
                }
                let vs = sample_variance_unbiased(&batch)
                    .map_err(|e| CmdError::Run(e.to_string()))?;
                ratios.push(vs / sigma2);
            }
            for &eps in epsilons {
                let hits = ratios.iter().filter(|&&r| (r - 1.0).abs() <= eps).count();
                let bound_raw = 1.0 - (kappa / nf - correction) / (eps * eps);
                rows.push(UnitConcentration {
                    layer,
                    unit,
                    eps,
                    kappa,
                    bound_raw,
                    bound: bound_raw.max(0.0),
                    empirical: hits as f64 / trials as f64,
                });
            }
        }
    }
    Ok(ConcentrationReport { rows, skipped })
}

/// Mean empirical concentration per epsilon, for comparing two networks.
pub fn mean_concentration(rows: &[UnitConcentration], eps: f64) -> f64 {
    let selected: Vec<f64> = rows
        .iter()
        .filter(|r| (r.eps - eps).abs() < 1e-12)
        .map(|r| r.empirical)
        .collect();
    if selected.is_empty() {
        f64::NAN
    } else {
        selected.iter().sum::<f64>() / selected.len() as f64
    }
}
