//! Dataset synthesis, CSV ingestion, deterministic splitting, nested
//! calibration subsets, and the 90-degree rotation shift transform.
//!
//! File formats:
//! - dataset CSV: header `id,f0,...,f{d-1},label` (the `id` column is
//!   optional; row index is used when absent),
//! - prediction CSV: header `id,p0,...,p{K-1}`.
//!
//! UTF-8, `.` decimal separator, LF newlines.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbMatrix;
use crate::rng::rng_from_seed;

/// A labelled tabular dataset.
///
/// Feature rows are stored row-major; values are immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
    ids: Vec<String>,
    /// Original label values in encoded order (lexicographic), recorded when
    /// labels were re-encoded from a file so external predictions can align.
    class_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset, validating shape, label range, id uniqueness, and
    /// feature finiteness.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
        ids: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one item"));
        }
        if n_features == 0 || features.len() != n * n_features {
            return Err(Error::invalid(format!(
                "feature buffer has {} values, expected {}x{}",
                features.len(),
                n,
                n_features
            )));
        }
        if ids.len() != n {
            return Err(Error::invalid("ids and labels must have equal length"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature value {bad}")));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate item id {id:?}")));
            }
        }
        Ok(Self {
            features,
            n_features,
            labels,
            n_classes,
            ids,
            class_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Feature row of item `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Original label values in encoded order, when loaded from a file.
    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// New dataset holding the given items (by position), preserving the
    /// class count and label mapping.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!("subset index {i} out of range")));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            ids.push(self.ids[i].clone());
        }
        let mut ds = Dataset::new(features, self.n_features, labels, self.n_classes, ids)?;
        ds.class_names = self.class_names.clone();
        Ok(ds)
    }
}

/// Sizes and seed for a train/test/calibration-pool split.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub n_cal_pool: usize,
    pub seed: u64,
}

/// Predicted probability rows aligned with a dataset by item id.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub ids: Vec<String>,
    pub probs: ProbMatrix,
}

impl PredictionSet {
    /// Reorders the prediction rows to match `ds`'s item order.
    ///
    /// Errors name the first dataset id with no prediction row.
    pub fn aligned_to(&self, ds: &Dataset) -> Result<ProbMatrix> {
        let index: std::collections::HashMap<&str, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut rows = Vec::with_capacity(ds.len());
        for id in ds.ids() {
            match index.get(id.as_str()) {
                Some(&i) => rows.push(self.probs.row(i).to_vec()),
                None => {
                    return Err(Error::Validation {
                        id: Some(id.clone()),
                        message: "no prediction row for this item".into(),
                    })
                }
            }
        }
        Ok(ProbMatrix::from_rows_unchecked(rows, self.probs.n_classes()))
    }
}

/// Generates the two-moons dataset: `n` points on two interleaving unit
/// half-circles plus isotropic Gaussian noise of standard deviation `noise`.
///
/// Class 0 (⌊n/2⌋ points): `(cos θ, sin θ)` for θ evenly spaced on `[0, π]`.
/// Class 1 (⌈n/2⌉ points): `(1 − cos θ, 0.5 − sin θ)`.
/// Deterministic given `seed`.
pub fn make_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid("make_moons: need at least 2 points"));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::invalid("make_moons: noise must be a nonnegative real"));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let linspace = |count: usize| -> Vec<f64> {
        if count == 1 {
            vec![0.0]
        } else {
            (0..count)
                .map(|i| std::f64::consts::PI * i as f64 / (count - 1) as f64)
                .collect()
        }
    };
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for theta in linspace(n_outer) {
        features.push(theta.cos());
        features.push(theta.sin());
        labels.push(0);
    }
    for theta in linspace(n_inner) {
        features.push(1.0 - theta.cos());
        features.push(0.5 - theta.sin());
        labels.push(1);
    }
    if noise > 0.0 {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, noise).map_err(|e| Error::Numerical(e.to_string()))?;
        for v in features.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let ids = (0..n).map(|i| i.to_string()).collect();
    Dataset::new(features, 2, labels, 2, ids)
}

/// Loads a dataset CSV. All columns except `label_column` (and an optional
/// `id` column) must be numeric features; labels are re-encoded to
/// contiguous `0..K-1` in lexicographic order of their original values.
pub fn load_dataset_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: None,
            column: None,
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: None,
            column: None,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            row: None,
            column: Some(label_column.to_string()),
            message: "label column not found".into(),
        })?;
    let id_idx = headers.iter().position(|h| h == "id");
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_idx && Some(i) != id_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Parse {
            path: path_str,
            row: None,
            column: None,
            message: "no feature columns".into(),
        });
    }

    let mut features = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    for (row_i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: Some(row_i + 1),
            column: None,
            message: e.to_string(),
        })?;
        for &col in &feature_cols {
            let cell = record.get(col).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                row: Some(row_i + 1),
                column: Some(headers[col].clone()),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path_str.clone(),
                    row: Some(row_i + 1),
                    column: Some(headers[col].clone()),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            features.push(value);
        }
        raw_labels.push(record.get(label_idx).unwrap_or("").trim().to_string());
        ids.push(match id_idx {
            Some(c) => record.get(c).unwrap_or("").trim().to_string(),
            None => row_i.to_string(),
        });
    }
    if raw_labels.is_empty() {
        return Err(Error::Parse {
            path: path_str,
            row: None,
            column: None,
            message: "file contains no data rows".into(),
        });
    }

    let mut class_names: Vec<String> = raw_labels.iter().cloned().collect::<HashSet<_>>().into_iter().collect();
    class_names.sort();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| class_names.binary_search(l).expect("label present in class set"))
        .collect();
    let n_classes = class_names.len();
    let mut ds = Dataset::new(features, feature_cols.len(), labels, n_classes, ids)?;
    ds.class_names = Some(class_names);
    Ok(ds)
}

/// Loads a prediction CSV with header `id,p0,...,p{K-1}`.
///
/// Rows whose sum deviates from 1 by at most 1e-6 are renormalized;
/// larger deviations and negative entries are validation errors naming the
/// row id.
pub fn load_predictions_csv(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: None,
            column: None,
            message: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: None,
            column: None,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.first().map(String::as_str) != Some("id") || headers.len() < 3 {
        return Err(Error::Parse {
            path: path_str,
            row: None,
            column: None,
            message: "expected header id,p0,...,p{K-1} with K >= 2".into(),
        });
    }
    let n_classes = headers.len() - 1;
    for (k, h) in headers[1..].iter().enumerate() {
        if h != &format!("p{k}") {
            return Err(Error::Parse {
                path: path_str,
                row: None,
                column: Some(h.clone()),
                message: format!("expected column p{k}"),
            });
        }
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (row_i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path_str.clone(),
            row: Some(row_i + 1),
            column: None,
            message: e.to_string(),
        })?;
        let id = record.get(0).unwrap_or("").trim().to_string();
        let mut row = Vec::with_capacity(n_classes);
        for k in 0..n_classes {
            let cell = record.get(k + 1).unwrap_or("");
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path_str.clone(),
                row: Some(row_i + 1),
                column: Some(format!("p{k}")),
                message: format!("not a number: {cell:?}"),
            })?;
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Validation {
                    id: Some(id.clone()),
                    message: format!("probability p{k} = {value} is negative or non-finite"),
                });
            }
            row.push(value);
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Validation {
                id: Some(id.clone()),
                message: format!("probabilities sum to {sum}, outside 1 ± 1e-6"),
            });
        }
        if (sum - 1.0).abs() > 1e-12 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        ids.push(id);
        rows.push(row);
    }
    if ids.is_empty() {
        return Err(Error::Parse {
            path: path_str,
            row: None,
            column: None,
            message: "file contains no data rows".into(),
        });
    }
    let mut seen = HashSet::new();
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Validation {
                id: Some(id.clone()),
                message: "duplicate prediction id".into(),
            });
        }
    }
    let probs = ProbMatrix::from_rows(rows, n_classes)?;
    Ok(PredictionSet { ids, probs })
}

/// Splits `ds` into disjoint uniform random train/test/calibration-pool
/// subsets of the requested sizes; remaining items are dropped.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let total = spec.n_train + spec.n_test + spec.n_cal_pool;
    if total > ds.len() {
        return Err(Error::invalid(format!(
            "split sizes sum to {total} but dataset has {} items",
            ds.len()
        )));
    }
    if spec.n_train == 0 || spec.n_test == 0 || spec.n_cal_pool == 0 {
        return Err(Error::invalid("split sizes must all be positive"));
    }
    let mut indices: Vec<usize> = (0..ds.len()).collect();
    let mut rng = rng_from_seed(spec.seed);
    indices.shuffle(&mut rng);
    let train = ds.subset(&indices[..spec.n_train])?;
    let test = ds.subset(&indices[spec.n_train..spec.n_train + spec.n_test])?;
    let cal_pool = ds.subset(&indices[spec.n_train + spec.n_test..total])?;
    Ok((train, test, cal_pool))
}

/// Builds nested calibration sets: one shuffle of the pool fixes an order,
/// and each requested size takes a prefix, so `set_i ⊂ set_{i+1}`.
pub fn nested_calibration_sets(pool: &Dataset, sizes: &[usize], seed: u64) -> Result<Vec<Dataset>> {
    if sizes.is_empty() {
        return Err(Error::invalid("nested_calibration_sets: empty size list"));
    }
    for w in sizes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid(format!(
                "sizes must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let max = *sizes.last().unwrap();
    if max > pool.len() {
        return Err(Error::invalid(format!(
            "largest size {max} exceeds pool size {}",
            pool.len()
        )));
    }
    if sizes[0] == 0 {
        return Err(Error::invalid("sizes must be positive"));
    }
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    let mut rng = rng_from_seed(seed);
    indices.shuffle(&mut rng);
    sizes.iter().map(|&s| pool.subset(&indices[..s])).collect()
}

/// Rotates a uniformly chosen `⌊fraction·N⌋` subset of items 90 degrees
/// counter-clockwise, treating each feature row as a row-major `side×side`
/// image. Returns the transformed dataset and a mask marking rotated items.
pub fn rotate90(
    ds: &Dataset,
    fraction: f64,
    side: usize,
    seed: u64,
) -> Result<(Dataset, Vec<bool>)> {
    if ds.n_features() != side * side || side == 0 {
        return Err(Error::invalid(format!(
            "rotate90: {} features is not {side}×{side}",
            ds.n_features()
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid("rotate90: fraction must lie in [0, 1]"));
    }
    let n = ds.len();
    let n_rotate = (fraction * n as f64).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(seed);
    indices.shuffle(&mut rng);
    let mut mask = vec![false; n];
    for &i in &indices[..n_rotate] {
        mask[i] = true;
    }

    let mut out = ds.clone();
    let mut rotated = vec![0.0; side * side];
    for (i, &flag) in mask.iter().enumerate() {
        if !flag {
            continue;
        }
        let row = &ds.features[i * ds.n_features..(i + 1) * ds.n_features];
        // CCW: out[r][c] = in[c][side-1-r]
        for r in 0..side {
            for c in 0..side {
                rotated[r * side + c] = row[c * side + (side - 1 - r)];
            }
        }
        out.features[i * ds.n_features..(i + 1) * ds.n_features].copy_from_slice(&rotated);
    }
    Ok((out, mask))
}
