//! Bagged tree ensembles with out-of-bag selection of pruning strength.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::metrics::brier_slices;
use crate::model::Classifier;
use crate::par;
use crate::rng::{derive_seed, rng_from_seed};

use super::{fit::grow_tree, DecisionTree, MaxFeatures, TreeParams};

/// Seven evenly spaced pruning strengths between 0 (no pruning) and 0.03.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [0.0, 0.005, 0.01, 0.015, 0.02, 0.025, 0.03];

/// Default number of trees in a bagged ensemble.
pub const DEFAULT_BAGGED_TREES: usize = 50;

/// A bagged ensemble of pruned CART trees.
///
/// Every tree is grown without a depth limit and with all features searched
/// per split; the pruning strength is chosen by out-of-bag Brier score over
/// a shared set of bootstrap samples, so the comparison isolates the
/// pruning effect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaggedEnsemble {
    /// Member trees, pruned at `chosen_alpha`.
    pub trees: Vec<DecisionTree>,
    /// Bootstrap sample (dataset row indices, with repeats) per tree.
    pub bootstrap_indices: Vec<Vec<u32>>,
    /// The alpha selected by out-of-bag Brier score (ties go to the
    /// smallest alpha).
    pub chosen_alpha: f64,
    /// `(alpha, out-of-bag Brier)` per candidate, in ascending alpha order.
    /// NaN when no item was ever out of bag.
    pub oob_brier: Vec<(f64, f64)>,
    n_features: usize,
    n_classes: usize,
    seed: u64,
}

impl BaggedEnsemble {
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl Classifier for BaggedEnsemble {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Unweighted mean of the member trees' leaf frequencies.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "input has {} features, ensemble expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let p = tree.predict_proba(x)?;
            for (a, v) in acc.iter_mut().zip(&p) {
                *a += v;
            }
        }
        let inv = 1.0 / self.trees.len() as f64;
        for a in acc.iter_mut() {
            *a *= inv;
        }
        Ok(acc)
    }
}

/// Fits a bagged ensemble: `n_trees` bootstrap trees per candidate alpha
/// (bootstrap indices shared across the grid), selecting the alpha that
/// minimizes out-of-bag Brier score.
///
/// Items that are never out of bag are excluded from the OOB score, not
/// imputed. If no item is ever out of bag the smallest alpha is chosen.
pub fn fit_bagged(
    train: &Dataset,
    n_trees: usize,
    alpha_grid: &[f64],
    seed: u64,
) -> Result<BaggedEnsemble> {
    if train.len() < 2 {
        return Err(Error::invalid("fit_bagged: need at least 2 items"));
    }
    if n_trees == 0 {
        return Err(Error::invalid("fit_bagged: need at least 1 tree"));
    }
    if alpha_grid.is_empty() {
        return Err(Error::invalid("fit_bagged: alpha grid must be nonempty"));
    }
    let mut grid: Vec<f64> = alpha_grid.to_vec();
    if grid.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::invalid("fit_bagged: alphas must be nonnegative reals"));
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();

    let n = train.len();
    let k = train.n_classes();
    let params = TreeParams {
        min_samples_leaf: 1,
        max_features: MaxFeatures::All,
        ccp_alpha: 0.0,
        seed: 0,
    };

    struct Grown {
        tree: DecisionTree,
        path: super::PrunePath,
        bootstrap: Vec<u32>,
        in_bag: Vec<bool>,
    }

    let grown: Vec<Grown> = par::try_map_indices(n_trees, |t| -> Result<Grown> {
        let mut rng = rng_from_seed(derive_seed(seed, "bagged-tree", t as u64));
        let bootstrap: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
        let mut in_bag = vec![false; n];
        for &i in &bootstrap {
            in_bag[i as usize] = true;
        }
        let tree = grow_tree(train, &bootstrap, &params, &mut rng)?;
        let path = tree.prune_path();
        Ok(Grown { tree, path, bootstrap, in_bag })
    })?;

    // Out-of-bag mean prediction per item, per candidate alpha. A single
    // root-to-leaf walk per (item, tree) serves every alpha: the effective
    // leaf at alpha a is the first node on the path whose collapse alpha
    // is <= a.
    let mut sums = vec![vec![0.0f64; n * k]; grid.len()];
    let mut tree_hits = vec![0u32; n];
    let mut chain: Vec<(f64, &[u32])> = Vec::new();
    for g in &grown {
        let alphas = g.path.node_alpha();
        for i in 0..n {
            if g.in_bag[i] {
                continue;
            }
            if tree_hits[i] == u32::MAX {
                continue;
            }
            tree_hits[i] += 1;
            chain.clear();
            let x = train.row(i);
            let mut at = 0usize;
            loop {
                let node = &g.tree.nodes[at];
                chain.push((alphas[at], &node.counts));
                match &node.split {
                    Some(s) => {
                        at = if x[s.feature] <= s.threshold { s.left } else { s.right };
                    }
                    None => break,
                }
            }
            for (gi, &alpha) in grid.iter().enumerate() {
                let counts = chain
                    .iter()
                    .find(|(a, _)| *a <= alpha)
                    .map(|(_, c)| *c)
                    .unwrap_or(chain.last().unwrap().1);
                let total: u32 = counts.iter().sum();
                let inv = 1.0 / f64::from(total);
                let row = &mut sums[gi][i * k..(i + 1) * k];
                for (slot, &c) in row.iter_mut().zip(counts) {
                    *slot += f64::from(c) * inv;
                }
            }
        }
    }

    let covered: Vec<usize> = (0..n).filter(|&i| tree_hits[i] > 0).collect();
    let mut oob_brier = Vec::with_capacity(grid.len());
    for (gi, &alpha) in grid.iter().enumerate() {
        if covered.is_empty() {
            oob_brier.push((alpha, f64::NAN));
            continue;
        }
        let labels: Vec<usize> = covered.iter().map(|&i| train.labels()[i]).collect();
        let rows: Vec<Vec<f64>> = covered
            .iter()
            .map(|&i| {
                let inv = 1.0 / f64::from(tree_hits[i]);
                sums[gi][i * k..(i + 1) * k].iter().map(|v| v * inv).collect()
            })
            .collect();
        let score = brier_slices(rows.iter().map(|r| r.as_slice()), &labels);
        oob_brier.push((alpha, score));
    }

    let mut chosen_alpha = grid[0];
    let mut best = f64::INFINITY;
    for &(alpha, score) in &oob_brier {
        if score.is_finite() && score < best {
            best = score;
            chosen_alpha = alpha;
        }
    }

    let trees: Vec<DecisionTree> = grown
        .iter()
        .map(|g| g.tree.pruned_at(&g.path, chosen_alpha))
        .collect();
    let bootstrap_indices = grown.into_iter().map(|g| g.bootstrap).collect();

    Ok(BaggedEnsemble {
        trees,
        bootstrap_indices,
        chosen_alpha,
        oob_brier,
        n_features: train.n_features(),
        n_classes: k,
        seed,
    })
}
