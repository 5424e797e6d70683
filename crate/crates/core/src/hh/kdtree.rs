//! A small k-d tree over square-root probability vectors, supporting
//! strict-radius and k-nearest queries.

use serde::{Deserialize, Serialize};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
enum KdNode {
    Internal {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

/// k-d tree over flat row-major points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct KdTree {
    points: Vec<f64>,
    dim: usize,
    nodes: Vec<KdNode>,
    /// Point positions arranged so each leaf owns a contiguous range.
    order: Vec<u32>,
}

impl KdTree {
    pub(crate) fn build(points: Vec<f64>, dim: usize) -> Self {
        let n = points.len() / dim;
        let order: Vec<u32> = (0..n as u32).collect();
        let mut tree = KdTree { points, dim, nodes: Vec::new(), order };
        tree.nodes.push(KdNode::Leaf { start: 0, end: n });
        tree.split_node(0, 0, n);
        tree
    }

    fn coord(&self, point: u32, d: usize) -> f64 {
        self.points[point as usize * self.dim + d]
    }

    fn split_node(&mut self, node: usize, start: usize, end: usize) {
        if end - start <= LEAF_SIZE {
            self.nodes[node] = KdNode::Leaf { start, end };
            return;
        }
        // split the dimension with the widest spread at its median
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for d in 0..self.dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &p in &self.order[start..end] {
                let v = self.coord(p, d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            self.nodes[node] = KdNode::Leaf { start, end };
            return; // all points identical
        }
        let mid = (start + end) / 2;
        let dim = best_dim;
        {
            let points = &self.points;
            let stride = self.dim;
            self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                let va = points[a as usize * stride + dim];
                let vb = points[b as usize * stride + dim];
                va.total_cmp(&vb).then(a.cmp(&b))
            });
        }
        let split_value = self.coord(self.order[mid], dim);
        let left = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end: mid });
        let right = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start: mid, end });
        self.nodes[node] = KdNode::Internal { dim, value: split_value, left, right };
        self.split_node(left, start, mid);
        self.split_node(right, mid, end);
    }

    fn dist(&self, point: u32, query: &[f64]) -> f64 {
        let base = point as usize * self.dim;
        let mut acc = 0.0;
        for (d, &q) in query.iter().enumerate() {
            let diff = self.points[base + d] - q;
            acc += diff * diff;
        }
        acc.sqrt()
    }

    /// Positions of all points with Euclidean distance strictly below
    /// `radius`, in ascending position order.
    pub(crate) fn radius_strict(&self, query: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match &self.nodes[node] {
                KdNode::Leaf { start, end } => {
                    for &p in &self.order[*start..*end] {
                        if self.dist(p, query) < radius {
                            out.push(p as usize);
                        }
                    }
                }
                KdNode::Internal { dim, value, left, right } => {
                    if query[*dim] - radius <= *value {
                        stack.push(*left);
                    }
                    if query[*dim] + radius >= *value {
                        stack.push(*right);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Positions of the `k` nearest points, breaking distance ties with
    /// `tie_key` (smaller key wins). Returns fewer when the tree is smaller
    /// than `k`. Output sorted by (distance, key).
    pub(crate) fn k_nearest<K: Ord + Clone>(
        &self,
        query: &[f64],
        k: usize,
        tie_key: impl Fn(usize) -> K,
    ) -> Vec<usize> {
        use std::collections::BinaryHeap;

        struct Cand<K> {
            dist: f64,
            key: K,
            pos: usize,
        }
        impl<K: Ord> PartialEq for Cand<K> {
            fn eq(&self, other: &Self) -> bool {
                self.dist == other.dist && self.key == other.key
            }
        }
        impl<K: Ord> Eq for Cand<K> {}
        impl<K: Ord> Ord for Cand<K> {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.dist.total_cmp(&other.dist).then(self.key.cmp(&other.key))
            }
        }
        impl<K: Ord> PartialOrd for Cand<K> {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }

        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Cand<K>> = BinaryHeap::new(); // max-heap: worst on top
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match &self.nodes[node] {
                KdNode::Leaf { start, end } => {
                    for &p in &self.order[*start..*end] {
                        let cand = Cand { dist: self.dist(p, query), key: tie_key(p as usize), pos: p as usize };
                        if heap.len() < k {
                            heap.push(cand);
                        } else if let Some(worst) = heap.peek() {
                            if cand.cmp(worst) == std::cmp::Ordering::Less {
                                heap.pop();
                                heap.push(cand);
                            }
                        }
                    }
                }
                KdNode::Internal { dim, value, left, right } => {
                    let axis_gap = query[*dim] - *value;
                    // visit the near side last so it is processed first
                    let (near, far) = if axis_gap <= 0.0 { (*left, *right) } else { (*right, *left) };
                    let must_visit_far = heap.len() < k
                        || axis_gap.abs() <= heap.peek().map(|w| w.dist).unwrap_or(f64::INFINITY);
                    if must_visit_far {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        let mut picked: Vec<Cand<K>> = heap.into_vec();
        picked.sort_by(|a, b| a.cmp(b));
        picked.into_iter().map(|c| c.pos).collect()
    }

    pub(crate) fn len(&self) -> usize {
        self.order.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(n: usize) -> Vec<f64> {
        (0..n).flat_map(|i| vec![(i % 7) as f64, (i / 7) as f64]).collect()
    }

    #[test]
    fn radius_matches_linear_scan() {
        let pts = grid_points(45);
        let tree = KdTree::build(pts.clone(), 2);
        for (q, r) in [([2.5, 3.5], 2.0), ([0.0, 0.0], 1.5), ([6.0, 6.0], 10.0), ([3.0, 3.0], 0.0)] {
            let got = tree.radius_strict(&q, r);
            let expect: Vec<usize> = (0..45)
                .filter(|&i| {
                    let dx = pts[2 * i] - q[0];
                    let dy = pts[2 * i + 1] - q[1];
                    (dx * dx + dy * dy).sqrt() < r
                })
                .collect();
            assert_eq!(got, expect, "query {q:?} r={r}");
        }
    }

    #[test]
    fn knn_matches_linear_scan_with_tie_break() {
        let pts = grid_points(45);
        let tree = KdTree::build(pts.clone(), 2);
        for k in [1, 3, 10, 45, 60] {
            let got = tree.k_nearest(&[2.2, 1.9], k, |i| i);
            let mut all: Vec<(f64, usize)> = (0..45)
                .map(|i| {
                    let dx = pts[2 * i] - 2.2;
                    let dy = pts[2 * i + 1] - 1.9;
                    ((dx * dx + dy * dy).sqrt(), i)
                })
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expect: Vec<usize> = all.iter().take(k).map(|&(_, i)| i).collect();
            assert_eq!(got, expect, "k={k}");
        }
    }

    #[test]
    fn duplicate_points_are_handled() {
        let pts = vec![1.0, 1.0].repeat(40);
        let tree = KdTree::build(pts, 2);
        assert_eq!(tree.len(), 40);
        assert_eq!(tree.radius_strict(&[1.0, 1.0], 1e-9).len(), 40);
        assert_eq!(tree.k_nearest(&[0.0, 0.0], 5, |i| i), vec![0, 1, 2, 3, 4]);
    }
}
