//! Minimal cost-complexity (weakest-link) pruning.
//!
//! For subtree `T_t` rooted at node `t`, the effective alpha is
//!
//! ```text
//! g(t) = (R(t) − Σ_{leaves l of T_t} R(l)) / (|leaves(T_t)| − 1)
//! ```
//!
//! where `R(t)` is the node's Gini impurity weighted by its training-sample
//! fraction. Repeatedly collapsing the node with the smallest `g` yields the
//! nested family of subtrees that minimize `R(T) + α·|leaves(T)|` as α grows.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{DecisionTree, Node};

/// The weakest-link pruning sequence of a fitted tree.
#[derive(Debug, Clone)]
pub struct PrunePath {
    /// `(alpha threshold, effective leaf count)` pairs with ascending alphas
    /// and strictly decreasing leaf counts; the first entry is the unpruned
    /// tree at alpha 0, the last is the root-only tree.
    entries: Vec<(f64, usize)>,
    /// Per original node: the alpha at which it collapses into a leaf
    /// (`+inf` for nodes that are already leaves).
    node_alpha: Vec<f64>,
}

impl PrunePath {
    /// `(alpha threshold, effective leaf count)` sequence.
    pub fn entries(&self) -> &[(f64, usize)] {
        &self.entries
    }

    pub(crate) fn node_alpha(&self) -> &[f64] {
        &self.node_alpha
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    g: f64,
    node: usize,
    version: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.g
            .total_cmp(&other.g)
            .then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl DecisionTree {
    /// Computes the weakest-link pruning sequence. Intended for trees grown
    /// without pruning; calling it on a pruned tree describes that tree.
    pub fn prune_path(&self) -> PrunePath {
        let n_nodes = self.nodes.len();
        let root_total = f64::from(self.nodes[0].counts.iter().sum::<u32>());
        let r: Vec<f64> = self
            .nodes
            .iter()
            .map(|nd| nd.gini() * f64::from(nd.counts.iter().sum::<u32>()) / root_total)
            .collect();

        let mut parent = vec![usize::MAX; n_nodes];
        for (i, nd) in self.nodes.iter().enumerate() {
            if let Some(s) = &nd.split {
                parent[s.left] = i;
                parent[s.right] = i;
            }
        }

        // Children always follow their parent in the node array, so a
        // reverse sweep aggregates bottom-up.
        let mut r_sub = r.clone();
        let mut n_leaves = vec![1usize; n_nodes];
        for i in (0..n_nodes).rev() {
            if let Some(s) = &self.nodes[i].split {
                r_sub[i] = r_sub[s.left] + r_sub[s.right];
                n_leaves[i] = n_leaves[s.left] + n_leaves[s.right];
            }
        }

        let g_of = |t: usize, r_sub: &[f64], n_leaves: &[usize]| -> f64 {
            (r[t] - r_sub[t]) / (n_leaves[t] - 1) as f64
        };

        let mut node_alpha = vec![f64::INFINITY; n_nodes];
        let mut alive: Vec<bool> = self.nodes.iter().map(|nd| !nd.is_leaf()).collect();
        let mut version = vec![0u32; n_nodes];
        let mut heap: BinaryHeap<Reverse<HeapEntry>> = BinaryHeap::new();
        for t in 0..n_nodes {
            if alive[t] {
                heap.push(Reverse(HeapEntry { g: g_of(t, &r_sub, &n_leaves), node: t, version: 0 }));
            }
        }

        let mut entries = vec![(0.0, n_leaves[0])];
        let mut current_leaves = n_leaves[0];
        let mut running_alpha = 0.0f64;
        let mut subtree_stack: Vec<usize> = Vec::new();

        while let Some(Reverse(entry)) = heap.pop() {
            let t = entry.node;
            if !alive[t] || entry.version != version[t] {
                continue;
            }
            running_alpha = running_alpha.max(entry.g);

            // Collapse t: its whole remaining subtree leaves the tree.
            let delta_r = r[t] - r_sub[t];
            let delta_leaves = n_leaves[t] - 1;
            alive[t] = false;
            node_alpha[t] = running_alpha;
            subtree_stack.clear();
            if let Some(s) = &self.nodes[t].split {
                subtree_stack.push(s.left);
                subtree_stack.push(s.right);
            }
            while let Some(d) = subtree_stack.pop() {
                if alive[d] {
                    alive[d] = false;
                    node_alpha[d] = running_alpha;
                }
                if let Some(s) = &self.nodes[d].split {
                    subtree_stack.push(s.left);
                    subtree_stack.push(s.right);
                }
            }

            current_leaves -= delta_leaves;
            match entries.last_mut() {
                Some(last) if last.0 == running_alpha => last.1 = current_leaves,
                _ => entries.push((running_alpha, current_leaves)),
            }

            // Refresh every ancestor's aggregate and heap entry.
            let mut a = parent[t];
            while a != usize::MAX {
                r_sub[a] += delta_r;
                n_leaves[a] -= delta_leaves;
                if alive[a] {
                    version[a] += 1;
                    heap.push(Reverse(HeapEntry {
                        g: g_of(a, &r_sub, &n_leaves),
                        node: a,
                        version: version[a],
                    }));
                }
                a = parent[a];
            }
        }

        PrunePath { entries, node_alpha }
    }

    /// The subtree obtained by collapsing every node whose weakest-link
    /// alpha is `<= alpha`; ties collapse, giving the smallest minimizer of
    /// `R(T) + α·|leaves|`.
    pub fn pruned_at(&self, path: &PrunePath, alpha: f64) -> DecisionTree {
        let node_alpha = path.node_alpha();
        let mut nodes: Vec<Node> = Vec::new();
        // (original index, destination index)
        let mut stack: Vec<(usize, usize)> = Vec::new();
        nodes.push(Node { split: None, counts: self.nodes[0].counts.clone() });
        stack.push((0, 0));
        while let Some((orig, dest)) = stack.pop() {
            let cut = node_alpha[orig] <= alpha;
            if cut {
                continue; // stays a leaf in the output
            }
            if let Some(s) = &self.nodes[orig].split {
                let left_dest = nodes.len();
                nodes.push(Node { split: None, counts: self.nodes[s.left].counts.clone() });
                let right_dest = nodes.len();
                nodes.push(Node { split: None, counts: self.nodes[s.right].counts.clone() });
                nodes[dest].split = Some(super::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: left_dest,
                    right: right_dest,
                });
                stack.push((s.right, right_dest));
                stack.push((s.left, left_dest));
            }
        }
        let mut params = self.params;
        params.ccp_alpha = alpha;
        DecisionTree {
            nodes,
            n_features: self.n_features,
            n_classes: self.n_classes,
            params,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fit_tree, TreeParams};
    use crate::dataio::Dataset;
    use approx::assert_abs_diff_eq;

    fn dataset(xs: &[f64], ys: &[usize], n_classes: usize) -> Dataset {
        let ids = (0..xs.len()).map(|i| i.to_string()).collect();
        Dataset::new(xs.to_vec(), 1, ys.to_vec(), n_classes, ids).unwrap()
    }

    #[test]
    fn root_only_tree_has_single_entry() {
        let ds = dataset(&[1.0, 1.0, 1.0], &[0, 0, 0], 2);
        let tree = fit_tree(&ds, &TreeParams::default()).unwrap();
        let path = tree.prune_path();
        assert_eq!(path.entries(), &[(0.0, 1)]);
    }

    #[test]
    fn one_split_tree_alpha_is_impurity_decrease() {
        // Two pure halves: root gini 0.5, leaves 0 ⇒ weakest-link alpha
        // equals the split's impurity decrease, 0.5.
        let ds = dataset(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1], 2);
        let tree = fit_tree(&ds, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 2);
        let path = tree.prune_path();
        assert_eq!(path.entries().len(), 2);
        assert_eq!(path.entries()[0], (0.0, 2));
        assert_abs_diff_eq!(path.entries()[1].0, 0.5, epsilon = 1e-12);
        assert_eq!(path.entries()[1].1, 1);
    }

    #[test]
    fn path_terminates_at_root_and_is_monotone() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.817).sin()).collect();
        let ys: Vec<usize> = (0..40).map(|i| (i % 3 == 0) as usize).collect();
        let ds = dataset(&xs, &ys, 2);
        let tree = fit_tree(&ds, &TreeParams::default()).unwrap();
        let path = tree.prune_path();
        let entries = path.entries();
        assert_eq!(entries.last().unwrap().1, 1);
        for w in entries.windows(2) {
            assert!(w[1].0 > w[0].0, "alphas must ascend: {entries:?}");
            assert!(w[1].1 < w[0].1, "leaf counts must strictly decrease");
        }
    }

    #[test]
    fn refit_at_intermediate_alpha_reproduces_subtree() {
        let xs: Vec<f64> = (0..80).map(|i| (i as f64 * 1.213).cos()).collect();
        let ys: Vec<usize> = (0..80)
            .map(|i| usize::from((i * 2654435761usize) % 10 < 4))
            .collect();
        let ds = dataset(&xs, &ys, 2);
        let tree = fit_tree(&ds, &TreeParams::default()).unwrap();
        let path = tree.prune_path();
        let entries = path.entries().to_vec();
        assert!(entries.len() >= 3, "need a nontrivial path");
        for w in entries.windows(2) {
            let mid = 0.5 * (w[0].0 + w[1].0);
            let refit = fit_tree(&ds, &TreeParams { ccp_alpha: mid, ..TreeParams::default() }).unwrap();
            let direct = tree.pruned_at(&path, w[0].0);
            assert_eq!(refit.nodes(), direct.nodes(), "alpha {mid} mismatch");
            assert_eq!(refit.leaf_count(), w[0].1);
        }
        // exactly at a threshold, the collapse is included
        let at = fit_tree(&ds, &TreeParams { ccp_alpha: entries[1].0, ..TreeParams::default() }).unwrap();
        assert_eq!(at.leaf_count(), entries[1].1);
    }
}
