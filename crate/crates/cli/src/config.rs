//! TOML configuration schemas for the subcommands. Unknown keys are
//! rejected everywhere; every default is materialized on load so the echoed
//! configuration is complete and can be fed back verbatim.

use crate::CmdError;
use serde::{Deserialize, Serialize};
use std::path::Path;
use vcl_core::data::{load_csv, make_blobs, make_gmm2_dataset, split, Dataset, LabelColumn, Standardizer};
use vcl_core::gmm::Gmm2;
use vcl_core::nn::{Activation, DropoutKind, DropoutPlacement, DropoutSpec, Normalizer};
use vcl_core::stats::Dist;
use vcl_core::train::TrainConfig;
use vcl_core::vcl::VclConfig;

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CmdError::Config(format!("{}: {e}", path.display())))
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string_pretty(value).expect("config serializes")
}

/// One learning-rate breakpoint.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrPoint {
    pub epoch: usize,
    pub rate: f64,
}

pub fn schedule_from(points: &[LrPoint]) -> Vec<(usize, f64)> {
    points.iter().map(|p| (p.epoch, p.rate)).collect()
}

fn default_lr_schedule() -> Vec<LrPoint> {
    vec![LrPoint { epoch: 0, rate: 0.01 }]
}

/// Label column: a header name or a 0-based index.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelSel {
    Index(usize),
    Name(String),
}

impl LabelSel {
    fn to_core(&self) -> LabelColumn {
        match self {
            LabelSel::Index(i) => LabelColumn::Index(*i),
            LabelSel::Name(n) => LabelColumn::Name(n.clone()),
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_delimiter() -> String {
    ",".into()
}

fn default_fractions() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

fn default_split_seed() -> u64 {
    1
}

/// Where the data comes from: a CSV file or a seeded synthetic generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// `csv`, `blobs`, or `gmm2`.
    pub source: String,
    // csv
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<LabelSel>,
    #[serde(default = "default_true")]
    pub header: bool,
    #[serde(default = "default_delimiter")]
    pub delimiter: String,
    // blobs
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    // gmm2
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu2: Option<Vec<f64>>,
    // generators
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub generator_seed: u64,
    // preprocessing
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_fractions")]
    pub split_fractions: [f64; 3],
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
}

/// The three splits, standardized with train statistics when requested.
pub struct ResolvedData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

impl DatasetConfig {
    fn base_dataset(&self) -> Result<(Dataset, Vec<String>), CmdError> {
        match self.source.as_str() {
            "csv" => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| CmdError::Config("csv source needs 'path'".into()))?;
                let label = self
                    .label_column
                    .as_ref()
                    .ok_or_else(|| CmdError::Config("csv source needs 'label_column'".into()))?;
                let delim = self.delimiter.as_bytes();
                if delim.len() != 1 {
                    return Err(CmdError::Config("delimiter must be one byte".into()));
                }
                let loaded = load_csv(Path::new(path), &label.to_core(), self.header, delim[0])?;
                let warnings = loaded
                    .skipped
                    .iter()
                    .map(|(row, reason)| format!("row {row} rejected: {reason}"))
                    .collect();
                Ok((loaded.dataset, warnings))
            }
            "blobs" => {
                let centers = self
                    .centers
                    .clone()
                    .ok_or_else(|| CmdError::Config("blobs source needs 'centers'".into()))?;
                let sd = self.sd.unwrap_or(1.0);
                let count = self
                    .count
                    .ok_or_else(|| CmdError::Config("blobs source needs 'count'".into()))?;
                Ok((make_blobs(&centers, sd, count, self.generator_seed)?, Vec::new()))
            }
            "gmm2" => {
                let g = self.gmm()?;
                let count = self
                    .count
                    .ok_or_else(|| CmdError::Config("gmm2 source needs 'count'".into()))?;
                Ok((make_gmm2_dataset(&g, count, self.generator_seed)?, Vec::new()))
            }
            other => Err(CmdError::Config(format!("unknown dataset source '{other}'"))),
        }
    }

    pub fn gmm(&self) -> Result<Gmm2, CmdError> {
        let p = self.p.ok_or_else(|| CmdError::Config("gmm2 source needs 'p'".into()))?;
        let mu1 = self
            .mu1
            .clone()
            .ok_or_else(|| CmdError::Config("gmm2 source needs 'mu1'".into()))?;
        let mu2 = self
            .mu2
            .clone()
            .ok_or_else(|| CmdError::Config("gmm2 source needs 'mu2'".into()))?;
        let sd = self.sd.unwrap_or(1.0);
        Ok(Gmm2::isotropic(p, mu1, mu2, sd)?)
    }

    /// Loads, splits, and (optionally) standardizes with train statistics.
    pub fn resolve(&self) -> Result<ResolvedData, CmdError> {
        let (dataset, mut warnings) = self.base_dataset()?;
        let f = self.split_fractions;
        let splits = split(&dataset, (f[0], f[1], f[2]), self.split_seed)?;
        warnings.extend(splits.warnings.clone());
        let (train, val, test) = if self.standardize {
            let stats = Standardizer::fit(&splits.train)?;
            (
                stats.transform(&splits.train)?,
                stats.transform(&splits.val)?,
                stats.transform(&splits.test)?,
            )
        } else {
            (splits.train, splits.val, splits.test)
        };
        Ok(ResolvedData { train, val, test, warnings })
    }
}

/// Architecture block of the train config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub activation: String,
    pub normalizer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<DropoutConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutConfig {
    pub kind: String,
    pub rate: f64,
    /// `all_hidden` or `last_hidden`.
    pub placement: String,
}

impl DropoutConfig {
    pub fn to_spec(&self) -> Result<DropoutSpec, CmdError> {
        let placement = match self.placement.as_str() {
            "all_hidden" => DropoutPlacement::AllHidden,
            "last_hidden" => DropoutPlacement::LastHidden,
            other => {
                return Err(CmdError::Config(format!("unknown dropout placement '{other}'")))
            }
        };
        Ok(DropoutSpec {
            kind: DropoutKind::parse(&self.kind)?,
            rate: self.rate,
            placement,
        })
    }
}

impl ModelConfig {
    pub fn activation(&self) -> Result<Activation, CmdError> {
        Ok(Activation::parse(&self.activation)?)
    }

    pub fn normalizer(&self) -> Result<Normalizer, CmdError> {
        Ok(Normalizer::parse(&self.normalizer)?)
    }
}

/// Optimization block of the train config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_lr_schedule")]
    pub lr_schedule: Vec<LrPoint>,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    1e-4
}

fn default_clip_norm() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VclSection {
    pub n: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_beta_init")]
    pub beta_init: f64,
}

fn default_gamma() -> f64 {
    0.01
}

fn default_beta_init() -> f64 {
    1.0
}

impl VclSection {
    pub fn to_core(self) -> VclConfig {
        VclConfig { n: self.n, gamma: self.gamma, beta_init: self.beta_init }
    }
}

/// `train` subcommand configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCommandConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: OptimConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vcl: Option<VclSection>,
}

impl TrainCommandConfig {
    pub fn to_train_config(&self) -> Result<TrainConfig, CmdError> {
        let normalizer = self.model.normalizer()?;
        let cfg = TrainConfig {
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            lr_schedule: schedule_from(&self.train.lr_schedule),
            momentum: self.train.momentum,
            weight_decay: self.train.weight_decay,
            clip_norm: self.train.clip_norm,
            seed: self.seed,
            vcl: self.vcl.map(|v| v.to_core()),
            normalizer,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `stats-verify` subcommand configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsVerifyConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eq_trials")]
    pub trials_eq_variance: usize,
    #[serde(default = "default_cov_trials")]
    pub trials_coverage: usize,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_cov_sizes")]
    pub coverage_sample_sizes: Vec<usize>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_distributions")]
    pub distributions: Vec<String>,
    #[serde(default = "default_rel_tol")]
    pub max_relative_error: f64,
    /// Negative-control fixture: perturbs the closed form so the harness
    /// must report failure.
    #[serde(default)]
    pub inject_formula_error: bool,
}

fn default_eq_trials() -> usize {
    1_000_000
}

fn default_cov_trials() -> usize {
    100_000
}

fn default_sample_sizes() -> Vec<usize> {
    vec![2, 5, 10, 50]
}

fn default_cov_sizes() -> Vec<usize> {
    vec![5, 20]
}

fn default_epsilons() -> Vec<f64> {
    vec![0.3, 0.5, 0.8]
}

fn default_distributions() -> Vec<String> {
    vec!["gaussian".into(), "uniform".into(), "two_point".into()]
}

fn default_rel_tol() -> f64 {
    0.02
}

pub fn parse_dist(name: &str) -> Result<Dist, CmdError> {
    Ok(match name {
        "gaussian" => Dist::standard_normal(),
        "uniform" => Dist::unit_variance_uniform(),
        "two_point" => Dist::unit_variance_two_point(),
        "laplace" => Dist::unit_variance_laplace(),
        other => return Err(CmdError::Config(format!("unknown distribution '{other}'"))),
    })
}

/// `gmm-phase` subcommand configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmPhaseConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<f64>,
    #[serde(default = "default_mu1")]
    pub mu1: Vec<f64>,
    #[serde(default = "default_mu2")]
    pub mu2: Vec<f64>,
    #[serde(default = "default_sd")]
    pub sd: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seeds_per_p")]
    pub seeds_per_p: usize,
    #[serde(default = "default_angle_tol")]
    pub angle_tolerance_degrees: f64,
    #[serde(default = "default_min_passing")]
    pub min_passing_seeds: usize,
    #[serde(default = "default_descent")]
    pub descent: DescentSection,
    #[serde(default = "default_unit_training")]
    pub unit_training: UnitTrainingSection,
}

fn default_p_values() -> Vec<f64> {
    vec![0.1, 0.25]
}

fn default_mu1() -> Vec<f64> {
    vec![-2.0, 0.0]
}

fn default_mu2() -> Vec<f64> {
    vec![2.0, 0.0]
}

fn default_sd() -> f64 {
    1.0
}

fn default_samples() -> usize {
    16_000
}

fn default_seeds_per_p() -> usize {
    10
}

fn default_angle_tol() -> f64 {
    8.0
}

fn default_min_passing() -> usize {
    9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentSection {
    pub steps: usize,
    pub lr: f64,
}

fn default_descent() -> DescentSection {
    DescentSection { steps: 3000, lr: 0.1 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitTrainingSection {
    /// Subset size in the separate regime. With equal subset variances the
    /// loss rewards variance growth, which in this regime points at the
    /// same direction as kurtosis minimization, and a larger subset
    /// suppresses the skew-driven bias of the variance ratio.
    pub n: usize,
    /// Subset size in the merge regime. Here variance growth fights the
    /// kurtosis signal (whose strength scales like 1/n), so a smaller
    /// subset keeps the kurtosis force dominant.
    #[serde(default = "default_merge_n")]
    pub merge_n: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: Vec<LrPoint>,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
    #[serde(default = "default_beta_init")]
    pub beta_init: f64,
}

fn default_merge_n() -> usize {
    16
}

fn default_unit_training() -> UnitTrainingSection {
    UnitTrainingSection {
        n: 64,
        merge_n: 16,
        batch_size: 128,
        epochs: 1000,
        lr_schedule: vec![
            LrPoint { epoch: 0, rate: 0.1 },
            LrPoint { epoch: 40, rate: 0.02 },
        ],
        momentum: 0.9,
        clip_norm: 1.0,
        beta_init: 1.0,
    }
}

/// `activation-hist` subcommand configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationHistConfig {
    #[serde(default)]
    pub seed: u64,
    pub model_path: String,
    pub dataset: DatasetConfig,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Hidden-layer indices to inspect; all hidden layers when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    /// Unit indices within each selected layer; all units when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<usize>>,
}

fn default_bins() -> usize {
    40
}

/// `bound-check` subcommand configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCheckConfig {
    #[serde(default)]
    pub seed: u64,
    pub model_path: String,
    pub dataset: DatasetConfig,
    #[serde(default = "default_bound_n")]
    pub n: usize,
    #[serde(default = "default_bound_eps")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_bound_trials")]
    pub trials: usize,
    /// Units sampled per layer (the first `k` of each layer).
    #[serde(default = "default_units_per_layer")]
    pub max_units_per_layer: usize,
}

fn default_bound_n() -> usize {
    20
}

fn default_bound_eps() -> Vec<f64> {
    vec![0.3, 0.5]
}

fn default_bound_trials() -> usize {
    2000
}

fn default_units_per_layer() -> usize {
    16
}
