//! Equal-mass histogram binning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ScalarCalibration;

/// Default bin count for histogram binning.
pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

/// An equal-mass histogram calibration map for binary scores.
///
/// Interior edges sit at empirical quantiles of the calibration scores;
/// bins are left-closed (`score >= edge` falls right of it), so duplicate
/// scores spanning a quantile edge stay in one bin. Each bin's value is the
/// mean label of the calibration items it holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistogramMap {
    /// Strictly ascending interior bin boundaries.
    edges: Vec<f64>,
    /// Mean calibration label per bin; length `edges.len() + 1`.
    values: Vec<f64>,
    /// Items per bin at fit time (each at least 1).
    bin_counts: Vec<usize>,
    /// Calibration items used for the fit.
    pub n_cal: usize,
}

impl HistogramMap {
    /// Bin index a score falls into: the number of edges `<= score`.
    fn bin_of(&self, score: f64) -> usize {
        self.edges.partition_point(|&e| e <= score)
    }

    /// Calibrated value for a score.
    pub fn apply(&self, score: f64) -> f64 {
        self.values[self.bin_of(score)]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn bin_counts(&self) -> &[usize] {
        &self.bin_counts
    }
}

impl ScalarCalibration for HistogramMap {
    fn apply_scalar(&self, score: f64) -> f64 {
        self.apply(score)
    }
}

/// Fits an equal-mass histogram map on binary-labelled scores.
///
/// When fewer than `2·n_bins` items are available the bin count drops to
/// `⌊N/2⌋` so every bin holds at least two items; degenerate quantiles
/// (duplicate scores) merge bins as needed, and bins left empty by the
/// left-closed assignment rule are merged away, so every surviving bin
/// holds at least one item.
pub fn fit_histogram(scores: &[f64], labels: &[usize], n_bins: usize) -> Result<HistogramMap> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::invalid("fit_histogram: need at least 2 items"));
    }
    if labels.len() != n {
        return Err(Error::invalid("fit_histogram: scores and labels misaligned"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("fit_histogram: labels must be binary"));
    }
    if n_bins == 0 {
        return Err(Error::invalid("fit_histogram: need at least 1 bin"));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("fit_histogram: non-finite score {bad}")));
    }

    let bins = if n < 2 * n_bins { (n / 2).max(1) } else { n_bins };

    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut edges: Vec<f64> = (1..bins)
        .map(|j| sorted[j * n / bins])
        .collect();
    edges.dedup();
    // an edge equal to the global minimum would leave the first bin empty
    while edges.first().is_some_and(|&e| e <= sorted[0]) {
        edges.remove(0);
    }

    loop {
        let n_bins_now = edges.len() + 1;
        let mut sums = vec![0.0f64; n_bins_now];
        let mut counts = vec![0usize; n_bins_now];
        for (&s, &y) in scores.iter().zip(labels) {
            let b = edges.partition_point(|&e| e <= s);
            sums[b] += y as f64;
            counts[b] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            // merge the empty bin into its left neighbor
            let edge_to_remove = if empty == 0 { 0 } else { empty - 1 };
            edges.remove(edge_to_remove);
            continue;
        }
        let values: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        return Ok(HistogramMap {
            edges,
            values,
            bin_counts: counts,
            n_cal: n,
        });
    }
}
