//! Full training run: dataset resolution, model construction, the SGD loop
//! with the configured normalizer, and report/model emission.

use crate::config::TrainCommandConfig;
use crate::report::ReportWriter;
use crate::CmdResult;
use serde::Serialize;
use std::path::Path;
use vcl_core::nn::{save_model, Mlp, MlpSpec};
use vcl_core::stats::seeded_rng;
use vcl_core::train::{train, write_history_tsv};

#[derive(Serialize)]
struct TrainResult {
    final_train_err: f64,
    final_val_err: f64,
    test_err: f64,
    selected_epoch: usize,
    selected_smoothed_val_err: f64,
    final_mean_kurtosis: f64,
    total_clip_events: u64,
    epochs: usize,
    dataset_warnings: Vec<String>,
}

pub fn run(cfg: &TrainCommandConfig, out: &Path) -> CmdResult {
    let writer = ReportWriter::new(out)?;
    let data = cfg.dataset.resolve()?;
    let train_cfg = cfg.to_train_config()?;

    let spec = MlpSpec {
        input_dim: data.train.dim(),
        hidden: cfg.model.hidden.clone(),
        classes: data.train.class_count(),
        activation: cfg.model.activation()?,
        normalizer: cfg.model.normalizer()?,
        dropout: match &cfg.model.dropout {
            Some(d) => Some(d.to_spec()?),
            None => None,
        },
    };
    let mut rng = seeded_rng(cfg.seed);
    let model = Mlp::new(&spec, &mut rng)?;

    let report = train(&model, &data.train, &data.val, &train_cfg)?;

    let test_preds = model.predict(&data.test.to_tensor()?)?;
    let test_err = test_preds
        .iter()
        .zip(data.test.labels())
        .filter(|(p, l)| p != l)
        .count() as f64
        / data.test.rows().max(1) as f64;

    write_history_tsv(&report.history, &writer.path("history.tsv"))?;
    save_model(&model, &writer.path("model.bin"))?;

    let last = report.history.last().expect("at least one epoch");
    writer.write_summary(
        "train",
        cfg.seed,
        cfg,
        &TrainResult {
            final_train_err: last.train_err,
            final_val_err: last.val_err,
            test_err,
            selected_epoch: report.selected_epoch,
            selected_smoothed_val_err: report.selected_smoothed_val,
            final_mean_kurtosis: last.mean_kurtosis,
            total_clip_events: report.total_clip_events,
            epochs: report.history.len(),
            dataset_warnings: data.warnings,
        },
    )?;
    Ok(true)
}
