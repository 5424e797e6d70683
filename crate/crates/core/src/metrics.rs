//! Scoring and experiment statistics: Brier score, accuracy, correlation,
//! and per-trial aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbMatrix;

/// Multi-class Brier score: mean over items of the squared distance between
/// the predicted probability vector and the one-hot label vector.
///
/// ```text
/// Brier = (1/N) Σ_i Σ_k (p_i[k] - 1(y_i = k))²
/// ```
///
/// Ranges over `[0, 2]`: 0 for perfect one-hot predictions, 2 for maximally
/// confident wrong ones.
pub fn brier(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    if probs.n_rows() != labels.len() {
        return Err(Error::invalid(format!(
            "brier: {} prediction rows vs {} labels",
            probs.n_rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("brier: empty input"));
    }
    let k = probs.n_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("brier: label {bad} out of range for {k} classes")));
    }
    Ok(brier_slices(probs.rows(), labels))
}

/// Brier score over raw probability rows; shared by [`brier`] and internal
/// callers that already hold validated rows.
pub(crate) fn brier_slices<'a, I>(rows: I, labels: &[usize]) -> f64
where
    I: Iterator<Item = &'a [f64]>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for (row, &y) in rows.zip(labels) {
        for (kk, &p) in row.iter().enumerate() {
            let target = if kk == y { 1.0 } else { 0.0 };
            let d = p - target;
            total += d * d;
        }
        n += 1;
    }
    total / n as f64
}

/// Fraction of items whose argmax prediction matches the label.
///
/// Argmax ties resolve to the smallest class index.
pub fn accuracy(probs: &ProbMatrix, labels: &[usize]) -> Result<f64> {
    if probs.n_rows() != labels.len() {
        return Err(Error::invalid(format!(
            "accuracy: {} prediction rows vs {} labels",
            probs.n_rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("accuracy: empty input"));
    }
    let correct = probs
        .rows()
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Index of the largest entry; ties resolve to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Sample Pearson correlation between mean-HH values and Brier improvements.
///
/// Requires at least 3 pairs and nonzero variance in both coordinates.
pub fn improvement_vs_hh(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(Error::invalid(format!(
            "improvement_vs_hh: need at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "zero variance in one coordinate".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Per-trial metric values with their mean and standard error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialStats {
    /// Raw metric value per trial.
    pub values: Vec<f64>,
    /// Arithmetic mean across trials.
    pub mean: f64,
    /// Standard error: sample (n−1) standard deviation divided by √n.
    /// Reported as 0 for a single trial (see `single_trial`).
    pub se: f64,
    /// True when only one trial was run, so `se` carries no information.
    pub single_trial: bool,
}

/// Aggregates per-trial metric values into mean and standard error.
pub fn aggregate_trials(values: &[f64]) -> Result<TrialStats> {
    if values.is_empty() {
        return Err(Error::invalid("aggregate_trials: empty input"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if values.len() == 1 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        var.sqrt() / n.sqrt()
    };
    Ok(TrialStats {
        values: values.to_vec(),
        mean,
        se,
        single_trial: values.len() == 1,
    })
}
