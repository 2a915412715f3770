//! Per-unit activation histograms of a trained model over a dataset, both
//! pre- and post-activation, with each unit's kurtosis.

use crate::analysis::activation_histograms;
use crate::config::ActivationHistConfig;
use crate::report::ReportWriter;
use crate::CmdResult;
use serde::Serialize;
use std::path::Path;
use vcl_core::nn::load_model;

#[derive(Serialize)]
struct LayerKurtosis {
    layer: usize,
    mean_pre_kurtosis: f64,
    mean_post_kurtosis: f64,
    units: usize,
}

#[derive(Serialize)]
struct HistResult {
    layers: Vec<LayerKurtosis>,
    dataset_warnings: Vec<String>,
}

pub fn run(cfg: &ActivationHistConfig, out: &Path) -> CmdResult {
    let writer = ReportWriter::new(out)?;
    let model = load_model(Path::new(&cfg.model_path))?;
    // Histograms are read over the training split, the same data the
    // model's statistics were shaped by.
    let data = cfg.dataset.resolve()?;
    let histograms = activation_histograms(
        &model,
        &data.train,
        cfg.bins,
        cfg.layers.as_deref(),
        cfg.units.as_deref(),
    )?;

    let mut hist_rows = Vec::new();
    let mut kurt_rows = Vec::new();
    for h in &histograms {
        let width = if h.counts.len() > 1 {
            (h.hi - h.lo) / h.counts.len() as f64
        } else {
            0.0
        };
        for (b, count) in h.counts.iter().enumerate() {
            let lo = h.lo + width * b as f64;
            let hi = if h.counts.len() == 1 { h.hi } else { lo + width };
            hist_rows.push(format!(
                "{}\t{}\t{}\t{}\t{:.10}\t{:.10}\t{}",
                h.layer, h.unit, h.stage, b, lo, hi, count
            ));
        }
        kurt_rows.push(format!(
            "{}\t{}\t{}\t{}",
            h.layer,
            h.unit,
            h.stage,
            h.kurtosis.map_or("undefined".into(), |k| format!("{k:.8}")),
        ));
    }
    writer.write_tsv(
        "histograms.tsv",
        "layer\tunit\tstage\tbin\tlo\thi\tcount",
        hist_rows,
    )?;
    writer.write_tsv("kurtosis.tsv", "layer\tunit\tstage\tkurtosis", kurt_rows)?;

    // Per-layer means over the selected units.
    let mut layers: Vec<usize> = histograms.iter().map(|h| h.layer).collect();
    layers.sort_unstable();
    layers.dedup();
    let mut summaries = Vec::new();
    for layer in layers {
        let mean_of = |stage: &str| {
            let ks: Vec<f64> = histograms
                .iter()
                .filter(|h| h.layer == layer && h.stage == stage)
                .filter_map(|h| h.kurtosis)
                .collect();
            if ks.is_empty() {
                f64::NAN
            } else {
                ks.iter().sum::<f64>() / ks.len() as f64
            }
        };
        let units = histograms
            .iter()
            .filter(|h| h.layer == layer && h.stage == "pre")
            .count();
        summaries.push(LayerKurtosis {
            layer,
            mean_pre_kurtosis: mean_of("pre"),
            mean_post_kurtosis: mean_of("post"),
            units,
        });
    }
    writer.write_summary(
        "activation-hist",
        cfg.seed,
        cfg,
        &HistResult { layers: summaries, dataset_warnings: data.warnings },
    )?;
    Ok(true)
}
