//! Moment-statistics verification: closed-form variance of sample variances
//! against Monte-Carlo simulation, and empirical variance-ratio coverage
//! against the kurtosis-driven concentration bound.

use crate::config::{parse_dist, StatsVerifyConfig};
use crate::report::ReportWriter;
use crate::{CmdError, CmdResult};
use serde::Serialize;
use std::path::Path;
use vcl_core::stats::{chebyshev_bound_rhs, mc_ratio_coverage, mc_var_of_sample_variance, var_of_sample_variance};

#[derive(Serialize)]
struct StatsVerifyResult {
    passed: bool,
    checks_total: usize,
    checks_failed: usize,
}

pub fn run(cfg: &StatsVerifyConfig, out: &Path) -> CmdResult {
    let writer = ReportWriter::new(out)?;
    let mut eq_rows = Vec::new();
    let mut coverage_rows = Vec::new();
    let mut failed = 0usize;
    let mut total = 0usize;
    let mut check_seed = cfg.seed;

    for name in &cfg.distributions {
        let dist = parse_dist(name)?;
        let sigma2 = dist.population_var();
        let m4 = dist.population_m4();
        for &n in &cfg.sample_sizes {
            check_seed += 1;
            let mut closed = var_of_sample_variance(m4, sigma2, n)?;
            if cfg.inject_formula_error {
                closed *= 1.5;
            }
            let mc = mc_var_of_sample_variance(&dist, n, cfg.trials_eq_variance, check_seed)?;
            let rel = if closed != 0.0 {
                (mc - closed).abs() / closed
            } else {
                mc.abs()
            };
            let pass = rel < cfg.max_relative_error;
            total += 1;
            if !pass {
                failed += 1;
            }
            eq_rows.push(format!(
                "{name}\t{n}\t{closed:.10}\t{mc:.10}\t{rel:.6}\t{}",
                if pass { "pass" } else { "FAIL" }
            ));
        }

        let Some(kappa) = dist.population_kurtosis() else {
            continue;
        };
        for &n in &cfg.coverage_sample_sizes {
            for &eps in &cfg.epsilons {
                check_seed += 1;
                let bound = chebyshev_bound_rhs(kappa, n, eps)?;
                let coverage = mc_ratio_coverage(&dist, n, eps, cfg.trials_coverage, check_seed)?;
                let pass = coverage >= bound;
                total += 1;
                if !pass {
                    failed += 1;
                }
                coverage_rows.push(format!(
                    "{name}\t{n}\t{eps}\t{kappa:.4}\t{bound:.6}\t{coverage:.6}\t{}",
                    if pass { "pass" } else { "FAIL" }
                ));
            }
        }
    }

    writer.write_tsv(
        "eq_variance.tsv",
        "dist\tn\tclosed_form\tmonte_carlo\trel_error\tstatus",
        eq_rows,
    )?;
    writer.write_tsv(
        "coverage.tsv",
        "dist\tn\teps\tkappa\tbound\tcoverage\tstatus",
        coverage_rows,
    )?;
    let passed = failed == 0;
    writer.write_summary(
        "stats-verify",
        cfg.seed,
        cfg,
        &StatsVerifyResult { passed, checks_total: total, checks_failed: failed },
    )?;
    if total == 0 {
        return Err(CmdError::Config("empty verification grid".into()));
    }
    Ok(passed)
}
