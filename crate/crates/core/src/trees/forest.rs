//! Random forests and the leaf-proximity kernel.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::par;
use crate::rng::{derive_seed, rng_from_seed};

use super::{fit::grow_tree, DecisionTree, MaxFeatures, TreeParams};

/// Default number of trees in a proximity forest.
pub const DEFAULT_FOREST_TREES: usize = 100;

/// A random forest: bootstrap CART trees with no depth limit, no pruning,
/// and `⌈√d⌉` candidate features per split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    /// Bootstrap sample (dataset row indices, with repeats) per tree.
    pub bootstrap_indices: Vec<Vec<u32>>,
    n_features: usize,
    n_classes: usize,
    seed: u64,
}

/// Fits a random forest with `n_trees` members. Deterministic per seed.
pub fn fit_forest(train: &Dataset, n_trees: usize, seed: u64) -> Result<Forest> {
    if train.len() < 2 {
        return Err(Error::invalid("fit_forest: need at least 2 items"));
    }
    if n_trees == 0 {
        return Err(Error::invalid("fit_forest: need at least 1 tree"));
    }
    let n = train.len();
    let params = TreeParams {
        min_samples_leaf: 1,
        max_features: MaxFeatures::Sqrt,
        ccp_alpha: 0.0,
        seed: 0,
    };
    let grown: Vec<(DecisionTree, Vec<u32>)> = par::try_map_indices(n_trees, |t| {
        let mut rng = rng_from_seed(derive_seed(seed, "forest-tree", t as u64));
        let bootstrap: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
        let tree = grow_tree(train, &bootstrap, &params, &mut rng)?;
        Ok::<_, Error>((tree, bootstrap))
    })?;
    let mut trees = Vec::with_capacity(n_trees);
    let mut bootstrap_indices = Vec::with_capacity(n_trees);
    for (tree, bootstrap) in grown {
        trees.push(tree);
        bootstrap_indices.push(bootstrap);
    }
    Ok(Forest {
        trees,
        bootstrap_indices,
        n_features: train.n_features(),
        n_classes: train.n_classes(),
        seed,
    })
}

impl Forest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "input has {} features, forest expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Routes `x` through every tree, returning one leaf id per tree.
    pub fn leaf_indices(&self, x: &[f64]) -> Result<Vec<u32>> {
        self.check_dims(x)?;
        Ok(self
            .trees
            .iter()
            .map(|t| t.leaf_index_unchecked(x) as u32)
            .collect())
    }

    /// Fraction of trees that place `a` and `b` in the same leaf.
    pub fn proximity(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_dims(a)?;
        self.check_dims(b)?;
        let matches = self
            .trees
            .iter()
            .filter(|t| t.leaf_index_unchecked(a) == t.leaf_index_unchecked(b))
            .count();
        Ok(matches as f64 / self.trees.len() as f64)
    }
}

impl Classifier for Forest {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Unweighted mean of the member trees' leaf frequencies.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let mut acc = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let leaf = tree.leaf_index_unchecked(x);
            let counts = &tree.nodes[leaf].counts;
            let total: u32 = counts.iter().sum();
            let inv = 1.0 / f64::from(total);
            for (a, &c) in acc.iter_mut().zip(counts) {
                *a += f64::from(c) * inv;
            }
        }
        let inv = 1.0 / self.trees.len() as f64;
        for a in acc.iter_mut() {
            *a *= inv;
        }
        Ok(acc)
    }
}
