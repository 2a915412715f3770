//! Contract tests against the compiled binary: exit codes, report
//! structure, config echoing, and bit-identical reproduction from the
//! echoed config.

use std::path::Path;
use std::process::Command;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_vcl-lab")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

// At n = 2 the sample variance is χ²₁-heavy-tailed and 2% verification
// needs the full million trials; the quick grid sticks to n ≥ 5 so the
// contract tests stay fast at any seed.
fn quick_stats_config() -> &'static str {
    r#"
seed = 11
trials_eq_variance = 100000
trials_coverage = 20000
sample_sizes = [5, 10]
coverage_sample_sizes = [20]
epsilons = [0.5]
distributions = ["gaussian", "two_point"]
max_relative_error = 0.02
"#
}

fn quick_train_config(normalizer: &str, vcl_block: &str) -> String {
    format!(
        r#"
seed = 7
[dataset]
source = "blobs"
centers = [[-3.0, 0.0], [3.0, 0.0], [0.0, -3.0], [0.0, 3.0]]
sd = 0.8
count = 800
generator_seed = 13
split_fractions = [0.8, 0.1, 0.1]
split_seed = 1
[model]
hidden = [16, 16]
activation = "elu"
normalizer = "{normalizer}"
[train]
batch_size = 32
epochs = 25
lr_schedule = [{{ epoch = 0, rate = 0.02 }}]
{vcl_block}
"#
    )
}

#[test]
fn stats_verify_passes_and_reruns_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, quick_stats_config());

    let out1 = dir.path().join("run1");
    let status = Command::new(binary())
        .args(["stats-verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out1)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    // Summary embeds the resolved config (defaults materialized) and seed.
    let summary = std::fs::read_to_string(out1.join("summary.toml")).unwrap();
    assert!(summary.contains("seed = 11"));
    assert!(summary.contains("[config]"));
    assert!(summary.contains("inject_formula_error = false"));
    assert!(summary.contains("passed = true"));

    // Rerunning from the echoed config reproduces the report byte for byte.
    let echoed = out1.join("resolved_config.toml");
    let out2 = dir.path().join("run2");
    let status = Command::new(binary())
        .args(["stats-verify", "--config"])
        .arg(&echoed)
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary2 = std::fs::read(out2.join("summary.toml")).unwrap();
    assert_eq!(std::fs::read(out1.join("summary.toml")).unwrap(), summary2);
    assert_eq!(
        std::fs::read(out1.join("eq_variance.tsv")).unwrap(),
        std::fs::read(out2.join("eq_variance.tsv")).unwrap()
    );
}

#[test]
fn stats_verify_negative_control_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(
        &cfg,
        &format!("{}inject_formula_error = true\n", quick_stats_config()),
    );
    let status = Command::new(binary())
        .args(["stats-verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, &format!("{}mystery_key = 3\n", quick_stats_config()));
    let output = Command::new(binary())
        .args(["stats-verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("mystery_key"), "stderr: {stderr}");
}

#[test]
fn missing_config_exits_two() {
    let status = Command::new(binary())
        .args(["stats-verify", "--config", "/nonexistent/cfg.toml"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, quick_stats_config());
    let out = dir.path().join("out");
    let status = Command::new(binary())
        .args(["stats-verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "99"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let summary = std::fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("seed = 99"));
    assert!(!summary.contains("seed = 11"));
}

#[test]
fn train_quick_preset_reaches_low_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(
        &cfg,
        &quick_train_config("vcl", "[vcl]\nn = 2\ngamma = 0.01\nbeta_init = 1.0"),
    );
    let out = dir.path().join("out");
    let start = std::time::Instant::now();
    let status = Command::new(binary())
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(start.elapsed().as_secs() < 60, "quick preset too slow");

    let summary = std::fs::read_to_string(out.join("summary.toml")).unwrap();
    let err_line = summary
        .lines()
        .find(|l| l.starts_with("final_train_err"))
        .unwrap();
    let err: f64 = err_line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!(err < 0.02, "train error {err}");
    assert!(out.join("model.bin").exists());
    assert!(out.join("history.tsv").exists());
}

#[test]
fn gamma_zero_and_no_normalizer_give_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_vcl = dir.path().join("vcl.toml");
    write(
        &cfg_vcl,
        &quick_train_config("vcl", "[vcl]\nn = 2\ngamma = 0.0\nbeta_init = 1.0"),
    );
    let cfg_none = dir.path().join("none.toml");
    write(&cfg_none, &quick_train_config("none", ""));

    let result_section = |out: &Path| {
        let text = std::fs::read_to_string(out.join("summary.toml")).unwrap();
        let idx = text.find("[result]").unwrap();
        text[idx..].to_string()
    };

    let out_vcl = dir.path().join("out-vcl");
    let out_none = dir.path().join("out-none");
    for (cfg, out) in [(&cfg_vcl, &out_vcl), (&cfg_none, &out_none)] {
        let status = Command::new(binary())
            .args(["train", "--config"])
            .arg(cfg)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    assert_eq!(result_section(&out_vcl), result_section(&out_none));
    // Histories agree bit for bit except the wall-time column.
    let strip_seconds = |path: &Path| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once('\t').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect()
    };
    assert_eq!(
        strip_seconds(&out_vcl.join("history.tsv")),
        strip_seconds(&out_none.join("history.tsv"))
    );
}

#[test]
fn batch_size_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    // 2n = 40 exceeds the batch size of 32.
    write(
        &cfg,
        &quick_train_config("vcl", "[vcl]\nn = 20\ngamma = 0.01\nbeta_init = 1.0"),
    );
    let output = Command::new(binary())
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("batch"), "stderr: {stderr}");
}

#[test]
fn activation_hist_and_bound_check_run_against_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("train.toml");
    write(
        &cfg,
        &quick_train_config("vcl", "[vcl]\nn = 2\ngamma = 0.01\nbeta_init = 1.0"),
    );
    let out = dir.path().join("out");
    assert_eq!(
        Command::new(binary())
            .args(["train", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .code(),
        Some(0)
    );
    let model = out.join("model.bin");

    let dataset_block = r#"
[dataset]
source = "blobs"
centers = [[-3.0, 0.0], [3.0, 0.0], [0.0, -3.0], [0.0, 3.0]]
sd = 0.8
count = 800
generator_seed = 13
split_fractions = [0.8, 0.1, 0.1]
split_seed = 1
"#;
    let hist_cfg = dir.path().join("hist.toml");
    write(
        &hist_cfg,
        &format!(
            "seed = 3\nmodel_path = \"{}\"\nbins = 20\nunits = [0, 1]\n{dataset_block}",
            model.display()
        ),
    );
    let hist_out = dir.path().join("hist-out");
    assert_eq!(
        Command::new(binary())
            .args(["activation-hist", "--config"])
            .arg(&hist_cfg)
            .arg("--out")
            .arg(&hist_out)
            .status()
            .unwrap()
            .code(),
        Some(0)
    );
    let hist = std::fs::read_to_string(hist_out.join("histograms.tsv")).unwrap();
    assert!(hist.lines().count() > 40);
    assert!(hist.contains("pre") && hist.contains("post"));

    // Out-of-range unit selection is a config error.
    let bad_cfg = dir.path().join("hist-bad.toml");
    write(
        &bad_cfg,
        &format!(
            "seed = 3\nmodel_path = \"{}\"\nbins = 20\nunits = [999]\n{dataset_block}",
            model.display()
        ),
    );
    assert_eq!(
        Command::new(binary())
            .args(["activation-hist", "--config"])
            .arg(&bad_cfg)
            .arg("--out")
            .arg(dir.path().join("x"))
            .status()
            .unwrap()
            .code(),
        Some(2)
    );

    let bound_cfg = dir.path().join("bound.toml");
    write(
        &bound_cfg,
        &format!(
            "seed = 9\nmodel_path = \"{}\"\nn = 20\nepsilons = [0.3, 0.5]\ntrials = 500\nmax_units_per_layer = 6\n{dataset_block}",
            model.display()
        ),
    );
    let bound_out = dir.path().join("bound-out");
    assert_eq!(
        Command::new(binary())
            .args(["bound-check", "--config"])
            .arg(&bound_cfg)
            .arg("--out")
            .arg(&bound_out)
            .status()
            .unwrap()
            .code(),
        Some(0)
    );
    let summary = std::fs::read_to_string(bound_out.join("summary.toml")).unwrap();
    assert!(summary.contains("passed = true"));
}
