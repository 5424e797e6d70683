//! Hidden-heterogeneity diagnostic: Hellinger geometry on the probability
//! simplex, radius neighborhoods served by a k-d tree, and the per-item HH
//! score.
//!
//! For a test item with prediction `p̂_t`, the diagnostic gathers the
//! calibration items whose predictions lie within Hellinger radius `r` of
//! `p̂_t`, trains a small bagged-tree ensemble on just those items, and
//! reports the Brier improvement that local model achieves over the
//! original classifier, clipped at 0:
//!
//! ```text
//! HH = max(0, Brier(f(U_t), Y) − Brier(g_t(U_t), Y)) ∈ [0, 2]
//! ```
//!
//! Large values flag subregions where items sharing a prediction have
//! distinguishable true class distributions — exactly the situation global
//! calibration maps cannot repair.

mod kdtree;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::metrics::brier_slices;
use crate::model::Classifier;
use crate::par;
use crate::prob::{is_simplex, ProbMatrix, SIMPLEX_TOL};
use crate::rng::derive_seed_from_keys;
use crate::trees::{fit_bagged, DEFAULT_ALPHA_GRID, DEFAULT_BAGGED_TREES};

use kdtree::KdTree;

/// Default Hellinger radius for probability neighborhoods.
pub const DEFAULT_RADIUS: f64 = 0.1;

/// Neighborhoods smaller than this expand to the nearest items instead.
pub const MIN_NEIGHBORHOOD: usize = 10;

/// Hellinger distance between two points of the simplex, in `[0, 1]`.
///
/// Computed as the Euclidean norm of the difference of element-wise square
/// roots, scaled by `1/√2`.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid("hellinger: dimension mismatch"));
    }
    if !is_simplex(p, SIMPLEX_TOL) || !is_simplex(q, SIMPLEX_TOL) {
        return Err(Error::invalid("hellinger: inputs must lie on the simplex"));
    }
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let diff = a.sqrt() - b.sqrt();
        acc += diff * diff;
    }
    Ok(acc.sqrt() / std::f64::consts::SQRT_2)
}

/// Spatial index over the element-wise square roots of a calibration set's
/// predicted probabilities. A Hellinger ball of radius `r` is answered as a
/// Euclidean ball of radius `r·√2` in this space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbIndex {
    tree: KdTree,
    ids: Vec<String>,
    n_classes: usize,
}

/// Builds the probability index for a calibration set.
pub fn build_prob_index(cal_probs: &ProbMatrix, ids: &[String]) -> Result<ProbIndex> {
    if cal_probs.n_rows() != ids.len() {
        return Err(Error::invalid("build_prob_index: ids and probs misaligned"));
    }
    if cal_probs.n_rows() == 0 {
        return Err(Error::invalid("build_prob_index: empty calibration set"));
    }
    let k = cal_probs.n_classes();
    let mut points = Vec::with_capacity(cal_probs.n_rows() * k);
    for row in cal_probs.rows() {
        points.extend(row.iter().map(|&v| v.max(0.0).sqrt()));
    }
    Ok(ProbIndex {
        tree: KdTree::build(points, k),
        ids: ids.to_vec(),
        n_classes: k,
    })
}

impl ProbIndex {
    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.len() == 0
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn sqrt_query(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() != self.n_classes {
            return Err(Error::invalid(format!(
                "query has {} classes, index expects {}",
                p.len(),
                self.n_classes
            )));
        }
        if !is_simplex(p, SIMPLEX_TOL) {
            return Err(Error::invalid("query must lie on the simplex"));
        }
        Ok(p.iter().map(|&v| v.max(0.0).sqrt()).collect())
    }

    /// Calibration positions with Hellinger distance strictly below `r`,
    /// in ascending position order.
    pub fn radius(&self, p: &[f64], r: f64) -> Result<Vec<usize>> {
        let q = self.sqrt_query(p)?;
        Ok(self.tree.radius_strict(&q, r * std::f64::consts::SQRT_2))
    }

    /// The `k` Hellinger-nearest calibration positions; distance ties break
    /// to the lexicographically smallest item id, so the result is
    /// independent of calibration-set order.
    pub fn k_nearest(&self, p: &[f64], k: usize) -> Result<Vec<usize>> {
        let q = self.sqrt_query(p)?;
        Ok(self.tree.k_nearest(&q, k, |pos| self.ids[pos].clone()))
    }
}

/// The exact strict-inequality Hellinger ball of Algorithm-style
/// neighborhoods: `U_t = { i : D_H(p̂_t, p̂_i) < r }`.
pub fn probability_neighborhood(index: &ProbIndex, p_t: &[f64], r: f64) -> Result<Vec<usize>> {
    index.radius(p_t, r)
}

/// Settings for the HH diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HhParams {
    /// Hellinger neighborhood radius.
    pub radius: f64,
    /// Neighborhoods below this size expand to the nearest items.
    pub min_neighborhood: usize,
    /// Trees in the local bagged ensemble.
    pub n_trees: usize,
    /// Pruning strengths searched by out-of-bag Brier score.
    pub alpha_grid: Vec<f64>,
    /// Master seed; local fits derive their seed from it and the sorted
    /// neighborhood item ids, so HH is invariant to calibration-set order.
    pub seed: u64,
}

impl HhParams {
    pub fn new(seed: u64) -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            min_neighborhood: MIN_NEIGHBORHOOD,
            n_trees: DEFAULT_BAGGED_TREES,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            seed,
        }
    }
}

/// Per-item output of the HH diagnostic.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HhEntry {
    /// Clipped Brier improvement of the local model, in `[0, 2]`.
    pub hh: f64,
    /// Number of calibration items in the (possibly expanded) neighborhood.
    pub neighborhood_size: usize,
    /// Brier score of the original classifier on the neighborhood.
    pub brier_f: f64,
    /// Brier score of the locally trained ensemble on the neighborhood.
    pub brier_g: f64,
}

/// Computes the HH score for one test prediction `p_t`.
///
/// `cal_probs` are the original classifier's stored predictions for the
/// calibration items (no model re-query happens here).
pub fn hidden_heterogeneity(
    index: &ProbIndex,
    p_t: &[f64],
    cal: &Dataset,
    cal_probs: &ProbMatrix,
    params: &HhParams,
) -> Result<HhEntry> {
    if cal.len() != cal_probs.n_rows() || cal.len() != index.len() {
        return Err(Error::invalid(
            "hidden_heterogeneity: calibration set, predictions, and index are misaligned",
        ));
    }
    let mut neighborhood = index.radius(p_t, params.radius)?;
    if neighborhood.len() < params.min_neighborhood {
        neighborhood = index.k_nearest(p_t, params.min_neighborhood)?;
    }

    // canonical order: sort by item id so both the local dataset and the
    // derived seed are independent of calibration-set order
    neighborhood.sort_by(|&a, &b| cal.ids()[a].cmp(&cal.ids()[b]));
    let ids: Vec<&str> = neighborhood.iter().map(|&i| cal.ids()[i].as_str()).collect();
    let labels: Vec<usize> = neighborhood.iter().map(|&i| cal.labels()[i]).collect();

    let brier_f = brier_slices(neighborhood.iter().map(|&i| cal_probs.row(i)), &labels);

    let brier_g = if neighborhood.len() < 2 {
        // a one-item neighborhood: the local model is that item's one-hot
        0.0
    } else {
        let local = cal.subset(&neighborhood)?;
        let seed = derive_seed_from_keys(params.seed, "hh-local", &ids);
        let ensemble = fit_bagged(&local, params.n_trees, &params.alpha_grid, seed)?;
        let rows: Vec<Vec<f64>> = (0..local.len())
            .map(|i| ensemble.predict_proba(local.row(i)))
            .collect::<Result<_>>()?;
        brier_slices(rows.iter().map(|r| r.as_slice()), &labels)
    };

    Ok(HhEntry {
        hh: (brier_f - brier_g).max(0.0),
        neighborhood_size: neighborhood.len(),
        brier_f,
        brier_g,
    })
}

/// HH for every row of a test prediction matrix; rows are processed
/// independently (in parallel with the `parallel` feature).
pub fn hidden_heterogeneity_batch(
    index: &ProbIndex,
    test_probs: &ProbMatrix,
    cal: &Dataset,
    cal_probs: &ProbMatrix,
    params: &HhParams,
) -> Result<Vec<HhEntry>> {
    par::try_map_indices(test_probs.n_rows(), |i| {
        hidden_heterogeneity(index, test_probs.row(i), cal, cal_probs, params)
    })
}

/// Arithmetic mean of per-item HH values.
pub fn mean_hh(entries: &[HhEntry]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::invalid("mean_hh: empty report"));
    }
    Ok(entries.iter().map(|e| e.hh).sum::<f64>() / entries.len() as f64)
}
