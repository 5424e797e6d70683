//! Greedy CART growth.

use rand::seq::index::sample;

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::{DecisionTree, MaxFeatures, Node, Split, TreeParams};

/// Splits may have zero impurity decrease (ties break by lowest feature
/// index, then lowest threshold); anything below this is float noise from a
/// computation that can never be truly negative.
const MIN_DECREASE: f64 = -1e-12;

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    n_left: usize,
}

/// Grows an unpruned tree over the dataset rows listed in `items`
/// (repeats allowed, as produced by bootstrap sampling).
pub(super) fn grow_tree(
    ds: &Dataset,
    items: &[u32],
    params: &TreeParams,
    rng: &mut Rng,
) -> Result<DecisionTree> {
    if items.is_empty() {
        return Err(Error::invalid("cannot fit a tree on an empty item set"));
    }
    let n_features = ds.n_features();
    let n_classes = ds.n_classes();
    let n_candidates = params.max_features.resolve(n_features);

    let mut nodes: Vec<Node> = Vec::new();
    // (node index, items reaching it); LIFO with left pushed last so the
    // layout (and rng consumption) is a deterministic pre-order walk.
    let mut stack: Vec<(usize, Vec<u32>)> = Vec::new();

    nodes.push(Node { split: None, counts: count_labels(ds, items, n_classes) });
    stack.push((0, items.to_vec()));

    let mut value_buf: Vec<(f64, usize)> = Vec::new();
    while let Some((node_idx, node_items)) = stack.pop() {
        let counts = nodes[node_idx].counts.clone();
        let n = node_items.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || n < 2 * params.min_samples_leaf {
            continue; // stays a leaf
        }

        let candidates: Vec<usize> = match params.max_features {
            MaxFeatures::All => (0..n_features).collect(),
            _ if n_candidates >= n_features => (0..n_features).collect(),
            _ => {
                let mut chosen: Vec<usize> = sample(rng, n_features, n_candidates).into_iter().collect();
                chosen.sort_unstable();
                chosen
            }
        };

        let parent_gini = nodes[node_idx].gini();
        let mut best: Option<BestSplit> = None;
        for &feature in &candidates {
            scan_feature(
                ds,
                &node_items,
                feature,
                &counts,
                parent_gini,
                params.min_samples_leaf,
                &mut value_buf,
                &mut best,
            );
        }

        let Some(best) = best else {
            continue; // no admissible split: leaf
        };

        let mut left_items = Vec::with_capacity(best.n_left);
        let mut right_items = Vec::with_capacity(n - best.n_left);
        for &it in &node_items {
            if ds.row(it as usize)[best.feature] <= best.threshold {
                left_items.push(it);
            } else {
                right_items.push(it);
            }
        }
        debug_assert_eq!(left_items.len(), best.n_left);

        let left_idx = nodes.len();
        nodes.push(Node { split: None, counts: count_labels(ds, &left_items, n_classes) });
        let right_idx = nodes.len();
        nodes.push(Node { split: None, counts: count_labels(ds, &right_items, n_classes) });
        nodes[node_idx].split = Some(Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left_idx,
            right: right_idx,
        });
        stack.push((right_idx, right_items));
        stack.push((left_idx, left_items));
    }

    Ok(DecisionTree { nodes, n_features, n_classes, params: *params })
}

fn count_labels(ds: &Dataset, items: &[u32], n_classes: usize) -> Vec<u32> {
    let mut counts = vec![0u32; n_classes];
    for &it in items {
        counts[ds.labels()[it as usize]] += 1;
    }
    counts
}

/// Scans one feature's sorted values for the best midpoint threshold,
/// updating `best` in place. Iteration order (ascending feature, ascending
/// threshold) plus strict improvement gives the documented tie-break.
#[allow(clippy::too_many_arguments)]
fn scan_feature(
    ds: &Dataset,
    items: &[u32],
    feature: usize,
    parent_counts: &[u32],
    parent_gini: f64,
    min_samples_leaf: usize,
    buf: &mut Vec<(f64, usize)>,
    best: &mut Option<BestSplit>,
) {
    let n = items.len();
    buf.clear();
    buf.extend(
        items
            .iter()
            .map(|&it| (ds.row(it as usize)[feature], ds.labels()[it as usize])),
    );
    buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if buf[0].0 == buf[n - 1].0 {
        return; // constant feature
    }

    let n_classes = parent_counts.len();
    let mut left_counts = vec![0u32; n_classes];
    let total = n as f64;
    for i in 0..n - 1 {
        left_counts[buf[i].1] += 1;
        let (a, b) = (buf[i].0, buf[i + 1].0);
        if a == b {
            continue;
        }
        let n_left = i + 1;
        let n_right = n - n_left;
        if n_left < min_samples_leaf || n_right < min_samples_leaf {
            continue;
        }
        let mut sq_left = 0.0;
        let mut sq_right = 0.0;
        for (k, &cl) in left_counts.iter().enumerate() {
            let l = f64::from(cl);
            let r = f64::from(parent_counts[k]) - l;
            sq_left += l * l;
            sq_right += r * r;
        }
        let gini_left = 1.0 - sq_left / (n_left as f64 * n_left as f64);
        let gini_right = 1.0 - sq_right / (n_right as f64 * n_right as f64);
        let weighted = (n_left as f64 * gini_left + n_right as f64 * gini_right) / total;
        let decrease = parent_gini - weighted;
        if decrease < MIN_DECREASE {
            continue;
        }
        let improves = match best {
            None => true,
            Some(b) => decrease > b.decrease,
        };
        if improves {
            let mut threshold = 0.5 * (a + b);
            if threshold >= b {
                threshold = a; // adjacent floats: keep the split non-empty
            }
            *best = Some(BestSplit { feature, threshold, decrease, n_left });
        }
    }
}
