//! CART decision trees with minimal cost-complexity pruning, bagged
//! ensembles tuned by out-of-bag Brier score, random forests, and the
//! leaf-proximity kernel they induce.

mod bagging;
mod fit;
mod forest;
mod prune;

pub use bagging::{fit_bagged, BaggedEnsemble, DEFAULT_ALPHA_GRID, DEFAULT_BAGGED_TREES};
pub use forest::{fit_forest, Forest, DEFAULT_FOREST_TREES};
pub use prune::PrunePath;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Number of candidate features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// Every feature is a candidate at every node.
    All,
    /// `⌈√d⌉` features, re-sampled at every node.
    Sqrt,
    /// A fixed number of features, re-sampled at every node.
    Count(usize),
}

impl MaxFeatures {
    pub(crate) fn resolve(&self, n_features: usize) -> usize {
        match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(c) => (*c).clamp(1, n_features),
        }
    }
}

/// Hyperparameters for a single CART fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum number of training items in each leaf.
    pub min_samples_leaf: usize,
    /// Candidate features per split.
    pub max_features: MaxFeatures,
    /// Cost-complexity pruning strength; 0 disables pruning.
    pub ccp_alpha: f64,
    /// Seed for feature subsampling (unused when `max_features` is `All`).
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            ccp_alpha: 0.0,
            seed: 0,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if !self.ccp_alpha.is_finite() || self.ccp_alpha < 0.0 {
            return Err(Error::invalid("ccp_alpha must be a nonnegative real"));
        }
        Ok(())
    }
}

/// Binary split stored at an internal node. Items with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// One tree node: an internal node carries a split; every node carries the
/// class-count histogram of the training items that reached it, so pruning
/// any subtree leaves a valid leaf behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub split: Option<Split>,
    pub counts: Vec<u32>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Gini impurity of the node's histogram.
    pub(crate) fn gini(&self) -> f64 {
        let n = f64::from(self.total());
        if n == 0.0 {
            return 0.0;
        }
        let sq: f64 = self.counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
        1.0 - sq / (n * n)
    }

    fn probabilities(&self) -> Vec<f64> {
        let n = f64::from(self.total());
        self.counts.iter().map(|&c| f64::from(c) / n).collect()
    }
}

/// A fitted CART classification tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
    params: TreeParams,
}

impl DecisionTree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "input has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// Index of the leaf node `x` routes to.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        self.check_dims(x)?;
        Ok(self.leaf_index_unchecked(x))
    }

    pub(crate) fn leaf_index_unchecked(&self, x: &[f64]) -> usize {
        let mut at = 0usize;
        while let Some(split) = &self.nodes[at].split {
            at = if x[split.feature] <= split.threshold {
                split.left
            } else {
                split.right
            };
        }
        at
    }
}

impl Classifier for DecisionTree {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Leaf histogram frequencies for the leaf `x` routes to.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(self.nodes[self.leaf_index_unchecked(x)].probabilities())
    }
}

/// Fits a CART tree by greedy Gini-impurity splitting, then applies minimal
/// cost-complexity pruning at `params.ccp_alpha`.
///
/// Ties in impurity break to the lowest feature index, then the lowest
/// threshold; a node with no admissible split becomes a leaf.
pub fn fit_tree(train: &Dataset, params: &TreeParams) -> Result<DecisionTree> {
    params.validate()?;
    if train.len() < params.min_samples_leaf {
        return Err(Error::invalid(format!(
            "training set of {} items is smaller than min_samples_leaf {}",
            train.len(),
            params.min_samples_leaf
        )));
    }
    let items: Vec<u32> = (0..train.len() as u32).collect();
    let mut rng = crate::rng::rng_from_seed(params.seed);
    let tree = fit::grow_tree(train, &items, params, &mut rng)?;
    if params.ccp_alpha > 0.0 {
        let path = tree.prune_path();
        Ok(tree.pruned_at(&path, params.ccp_alpha))
    } else {
        Ok(tree)
    }
}
