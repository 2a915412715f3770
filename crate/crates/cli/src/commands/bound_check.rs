//! Per-unit check that the empirical concentration of batch variances
//! clears the kurtosis-driven lower bound, unit by unit and epsilon by
//! epsilon.

use crate::analysis::{mean_concentration, unit_concentrations};
use crate::config::BoundCheckConfig;
use crate::report::ReportWriter;
use crate::CmdResult;
use serde::Serialize;
use std::path::Path;
use vcl_core::nn::load_model;

#[derive(Serialize)]
struct EpsSummary {
    eps: f64,
    mean_empirical: f64,
    units: usize,
    violations: usize,
}

#[derive(Serialize)]
struct BoundCheckResult {
    passed: bool,
    per_eps: Vec<EpsSummary>,
    skipped_units: Vec<String>,
    dataset_warnings: Vec<String>,
}

pub fn run(cfg: &BoundCheckConfig, out: &Path) -> CmdResult {
    let writer = ReportWriter::new(out)?;
    let model = load_model(Path::new(&cfg.model_path))?;
    let data = cfg.dataset.resolve()?;
    let report = unit_concentrations(
        &model,
        &data.train,
        cfg.n,
        &cfg.epsilons,
        cfg.trials,
        cfg.max_units_per_layer,
        cfg.seed,
    )?;

    let mut rows = Vec::new();
    let mut all_pass = true;
    for r in &report.rows {
        let pass = r.empirical >= r.bound;
        all_pass &= pass;
        rows.push(format!(
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
            r.layer,
            r.unit,
            r.eps,
            r.kappa,
            r.bound_raw,
            r.bound,
            r.empirical,
            if pass { "pass" } else { "FAIL" }
        ));
    }
    writer.write_tsv(
        "bound_check.tsv",
        "layer\tunit\teps\tkappa\tbound_raw\tbound\tempirical\tstatus",
        rows,
    )?;

    let per_eps = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let units = report.rows.iter().filter(|r| (r.eps - eps).abs() < 1e-12).count();
            let violations = report
                .rows
                .iter()
                .filter(|r| (r.eps - eps).abs() < 1e-12 && r.empirical < r.bound)
                .count();
            EpsSummary {
                eps,
                mean_empirical: mean_concentration(&report.rows, eps),
                units,
                violations,
            }
        })
        .collect();

    writer.write_summary(
        "bound-check",
        cfg.seed,
        cfg,
        &BoundCheckResult {
            passed: all_pass,
            per_eps,
            skipped_units: report
                .skipped
                .iter()
                .map(|(l, u)| format!("layer {l} unit {u}: zero variance"))
                .collect(),
            dataset_warnings: data.warnings,
        },
    )?;
    Ok(all_pass)
}
