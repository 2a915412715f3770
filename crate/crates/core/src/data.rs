//! Dataset ingestion and synthesis: CSV loading with per-row rejection
//! reporting, deterministic stratified splits, train-statistics
//! standardization, and seeded generators for mixture and blob experiments.

use crate::error::{CoreError, Result};
use crate::gmm::Gmm2;
use crate::stats::seeded_rng;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::Path;

/// In-memory tabular dataset: row-major features and dense class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    rows: usize,
    dim: usize,
    labels: Vec<usize>,
    class_count: usize,
    pub feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        dim: usize,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Dataset> {
        if dim == 0 {
            return Err(CoreError::Data("dataset needs at least one feature".into()));
        }
        if !features.len().is_multiple_of(dim) {
            return Err(CoreError::Data("feature buffer does not divide into rows".into()));
        }
        let rows = features.len() / dim;
        if labels.len() != rows {
            return Err(CoreError::Data(format!(
                "{rows} rows but {} labels",
                labels.len()
            )));
        }
        if class_count == 0 || labels.iter().any(|&l| l >= class_count) {
            return Err(CoreError::Data("labels out of class range".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Data("non-finite feature values".into()));
        }
        Ok(Dataset {
            features,
            rows,
            dim,
            labels,
            class_count,
            feature_names: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Whole feature matrix as a (non-tracked) tensor.
    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::matrix(self.rows, self.dim, self.features.clone())
    }

    /// Selected rows as a batch tensor plus their labels.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.rows {
                return Err(CoreError::invalid(format!("row index {i} out of range")));
            }
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok((Tensor::matrix(indices.len(), self.dim, data)?, labels))
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            rows: indices.len(),
            dim: self.dim,
            labels,
            class_count: self.class_count,
            feature_names: self.feature_names.clone(),
        }
    }
}

/// How the label column is addressed.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

/// Result of [`load_csv`]: the dataset plus the rows that were rejected,
/// with their (0-based, data-row) indices and reasons.
#[derive(Debug)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub skipped: Vec<(usize, String)>,
}

/// Loads a delimited text file. Non-label columns must parse as floats;
/// rows with unparseable or missing values are rejected and reported, never
/// silently imputed. Label values map to dense class indices in first
/// appearance order.
pub fn load_csv(
    path: &Path,
    label: &LabelColumn,
    has_header: bool,
    delimiter: u8,
) -> Result<CsvLoad> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CoreError::Data(format!("cannot open {}: {e}", path.display())))?;

    let headers: Option<Vec<String>> = if has_header {
        Some(reader.headers().map_err(|e| CoreError::Data(e.to_string()))?
            .iter()
            .map(|s| s.to_string())
            .collect())
    } else {
        None
    };

    let mut label_idx: Option<usize> = match label {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Name(name) => {
            let headers = headers.as_ref().ok_or_else(|| {
                CoreError::Data("label column by name requires a header row".into())
            })?;
            Some(
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CoreError::Data(format!("label column '{name}' not found")))?,
            )
        }
    };

    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut skipped: Vec<(usize, String)> = Vec::new();
    let mut width: Option<usize> = None;

    for (row_idx, record) in reader.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                skipped.push((row_idx, format!("unreadable record: {e}")));
                continue;
            }
        };
        let cols = record.len();
        let li = match label_idx {
            Some(i) if i < cols => i,
            Some(i) => {
                skipped.push((row_idx, format!("label column {i} missing ({cols} columns)")));
                continue;
            }
            None => unreachable!(),
        };
        let expected_width = cols - 1;
        match width {
            None => width = Some(expected_width),
            Some(w) if w != expected_width => {
                skipped.push((row_idx, format!("expected {w} feature columns, got {expected_width}")));
                continue;
            }
            Some(_) => {}
        }
        let mut row_feats = Vec::with_capacity(expected_width);
        let mut bad: Option<String> = None;
        for (i, field) in record.iter().enumerate() {
            if i == li {
                continue;
            }
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row_feats.push(v),
                Ok(v) => {
                    bad = Some(format!("non-finite value {v} in column {i}"));
                    break;
                }
                Err(_) => {
                    bad = Some(format!("unparseable value '{field}' in column {i}"));
                    break;
                }
            }
        }
        if let Some(reason) = bad {
            skipped.push((row_idx, reason));
            continue;
        }
        let label_field = record.get(li).unwrap_or("").trim();
        if label_field.is_empty() {
            skipped.push((row_idx, "empty label".into()));
            continue;
        }
        features.extend_from_slice(&row_feats);
        raw_labels.push(label_field.to_string());
    }
    // keep the borrow checker quiet about the one-shot Option
    label_idx.take();

    if raw_labels.is_empty() {
        return Err(CoreError::Data(format!(
            "no usable rows in {} ({} rejected)",
            path.display(),
            skipped.len()
        )));
    }

    // Dense class ids in first-appearance order.
    let mut classes: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(raw_labels.len());
    for raw in &raw_labels {
        let id = match classes.iter().position(|c| c == raw) {
            Some(i) => i,
            None => {
                classes.push(raw.clone());
                classes.len() - 1
            }
        };
        labels.push(id);
    }

    let dim = width.unwrap_or(0);
    let mut dataset = Dataset::new(features, dim, labels, classes.len())?;
    if let Some(headers) = headers {
        let li = match label {
            LabelColumn::Index(i) => *i,
            LabelColumn::Name(name) => headers.iter().position(|h| h == name).unwrap(),
        };
        dataset.feature_names = Some(
            headers
                .into_iter()
                .enumerate()
                .filter(|(i, _)| *i != li)
                .map(|(_, h)| h)
                .collect(),
        );
    }
    Ok(CsvLoad { dataset, skipped })
}

/// Writes a dataset as CSV with a trailing `label` column, for round trips.
pub fn save_csv(ds: &Dataset, path: &Path, delimiter: u8) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_path(path)
        .map_err(|e| CoreError::Io(e.to_string()))?;
    let names: Vec<String> = match &ds.feature_names {
        Some(n) => n.clone(),
        None => (0..ds.dim()).map(|i| format!("f{i}")).collect(),
    };
    let mut header = names;
    header.push("label".into());
    writer
        .write_record(&header)
        .map_err(|e| CoreError::Io(e.to_string()))?;
    for i in 0..ds.rows() {
        let mut record: Vec<String> = ds.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        record.push(ds.labels()[i].to_string());
        writer
            .write_record(&record)
            .map_err(|e| CoreError::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-feature centering/scaling statistics fitted on a training split.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits mean and (population) standard deviation per feature.
    pub fn fit(train: &Dataset) -> Result<Standardizer> {
        if train.rows() == 0 {
            return Err(CoreError::Data("cannot fit statistics on an empty split".into()));
        }
        let (rows, dim) = (train.rows(), train.dim());
        let mut mean = vec![0.0; dim];
        for i in 0..rows {
            for (m, v) in mean.iter_mut().zip(train.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= rows as f64;
        }
        let mut var = vec![0.0; dim];
        for i in 0..rows {
            for j in 0..dim {
                let d = train.row(i)[j] - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.iter().map(|v| (v / rows as f64).sqrt()).collect();
        Ok(Standardizer { mean, std })
    }

    /// `(x − μ)/σ` per feature; features with σ = 0 are centered only.
    pub fn transform(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.mean.len() {
            return Err(CoreError::shape("standardize", "feature dimension mismatch"));
        }
        let mut features = Vec::with_capacity(ds.features().len());
        for i in 0..ds.rows() {
            for j in 0..ds.dim() {
                let centered = ds.row(i)[j] - self.mean[j];
                features.push(if self.std[j] > 0.0 { centered / self.std[j] } else { centered });
            }
        }
        let mut out = Dataset::new(features, ds.dim(), ds.labels().to_vec(), ds.class_count())?;
        out.feature_names = ds.feature_names.clone();
        Ok(out)
    }
}

/// Stratified three-way split.
#[derive(Debug)]
pub struct SplitResult {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub warnings: Vec<String>,
}

/// Splits a dataset by class with a seeded shuffle. Fractions must be
/// positive and sum to at most 1; the three parts are disjoint and, when the
/// fractions sum to 1, exhaustive up to per-class rounding.
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<SplitResult> {
    let (f1, f2, f3) = fractions;
    if f1 <= 0.0 || f2 <= 0.0 || f3 <= 0.0 {
        return Err(CoreError::invalid("split fractions must be positive"));
    }
    let total = f1 + f2 + f3;
    if total > 1.0 + 1e-9 {
        return Err(CoreError::invalid(format!("split fractions sum to {total} > 1")));
    }
    let exhaustive = (total - 1.0).abs() <= 1e-9;

    let mut rng = seeded_rng(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.class_count()];
    for (i, &label) in ds.labels().iter().enumerate() {
        by_class[label].push(i);
    }

    let mut warnings = Vec::new();
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (class, mut indices) in by_class.into_iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 3 {
            warnings.push(format!(
                "class {class} has only {} rows; splits are best-effort",
                indices.len()
            ));
        }
        indices.shuffle(&mut rng);
        let c = indices.len();
        let mut counts = [
            (f1 * c as f64).floor() as usize,
            (f2 * c as f64).floor() as usize,
            (f3 * c as f64).floor() as usize,
        ];
        if exhaustive {
            // Hand leftover rows to the largest fractional remainders.
            let mut leftover = c - counts.iter().sum::<usize>();
            let mut remainders = [
                (f1 * c as f64).fract(),
                (f2 * c as f64).fract(),
                (f3 * c as f64).fract(),
            ];
            while leftover > 0 {
                let k = remainders
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                counts[k] += 1;
                remainders[k] = -1.0;
                leftover -= 1;
            }
        }
        let mut cursor = 0;
        for (part, &count) in parts.iter_mut().zip(counts.iter()) {
            let end = (cursor + count).min(c);
            part.extend_from_slice(&indices[cursor..end]);
            cursor = end;
        }
    }
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    Ok(SplitResult {
        train: ds.subset(&parts[0]),
        val: ds.subset(&parts[1]),
        test: ds.subset(&parts[2]),
        warnings,
    })
}

/// Draws `count` points from a two-component Gaussian mixture; labels record
/// the component (0 for the first, drawn with probability `p`).
pub fn make_gmm2_dataset(g: &Gmm2, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(CoreError::invalid("need at least one sample"));
    }
    let (chol1, chol2) = g.cholesky_factors()?;
    let mut rng = seeded_rng(seed);
    let d = g.dim();
    let mut features = Vec::with_capacity(count * d);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let (x, component) = g.sample(&chol1, &chol2, &mut rng);
        features.extend(x.iter());
        labels.push(component);
    }
    Dataset::new(features, d, labels, 2)
}

/// Isotropic Gaussian blobs around the given centers, classes as balanced
/// as `count` allows, rows shuffled deterministically.
pub fn make_blobs(centers: &[Vec<f64>], sd: f64, count: usize, seed: u64) -> Result<Dataset> {
    if centers.is_empty() {
        return Err(CoreError::invalid("need at least one blob center"));
    }
    let d = centers[0].len();
    if d == 0 || centers.iter().any(|c| c.len() != d) {
        return Err(CoreError::invalid("blob centers must share a nonzero dimension"));
    }
    if count < centers.len() {
        return Err(CoreError::invalid("fewer samples than classes"));
    }
    let mut rng = seeded_rng(seed);
    let k = centers.len();
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut rng);
    let mut features = vec![0.0; count * d];
    let mut labels = vec![0usize; count];
    for (slot, &row) in order.iter().enumerate() {
        let class = slot % k;
        labels[row] = class;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[row * d + j] = centers[class][j] + sd * z;
        }
    }
    Dataset::new(features, d, labels, k)
}

/// Draws i.i.d. rows from a seeded standard normal, for diagnostics.
pub fn make_gaussian_matrix(rows: usize, dim: usize, seed: u64) -> Result<Dataset> {
    if rows == 0 || dim == 0 {
        return Err(CoreError::invalid("matrix must be nonempty"));
    }
    let mut rng = seeded_rng(seed);
    let features: Vec<f64> = (0..rows * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        })
        .collect();
    let labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..2)).collect();
    Dataset::new(features, dim, labels, 2)
}
