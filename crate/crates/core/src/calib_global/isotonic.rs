//! Isotonic regression by pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ScalarCalibration;

/// A nondecreasing step function on `[0, 1]` fitted by PAV.
///
/// Queries between breakpoints take the left step value; queries outside
/// the fitted range clamp to the end steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsotonicMap {
    /// Strictly ascending unique calibration scores.
    breakpoints: Vec<f64>,
    /// Nondecreasing fitted value at each breakpoint, in `[0, 1]`.
    values: Vec<f64>,
    /// Calibration items used for the fit.
    pub n_cal: usize,
}

impl IsotonicMap {
    /// Calibrated value for a score.
    pub fn apply(&self, score: f64) -> f64 {
        // largest breakpoint <= score, clamped to the first step below range
        let idx = self.breakpoints.partition_point(|&b| b <= score);
        if idx == 0 {
            self.values[0]
        } else {
            self.values[idx - 1]
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ScalarCalibration for IsotonicMap {
    fn apply_scalar(&self, score: f64) -> f64 {
        self.apply(score)
    }
}

/// Fits isotonic regression of binary labels on scores: the nondecreasing
/// function minimizing squared loss, via pool-adjacent-violators. Items
/// sharing a score are pooled up front so the result is a function.
pub fn fit_isotonic(scores: &[f64], labels: &[usize]) -> Result<IsotonicMap> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::invalid("fit_isotonic: need at least 1 item"));
    }
    if labels.len() != n {
        return Err(Error::invalid("fit_isotonic: scores and labels misaligned"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("fit_isotonic: labels must be binary"));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("fit_isotonic: non-finite score {bad}")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // pool ties: one (score, mean label, weight) per unique score
    let mut points: Vec<(f64, f64, f64)> = Vec::new();
    for &i in &order {
        match points.last_mut() {
            Some(last) if last.0 == scores[i] => {
                last.1 += labels[i] as f64;
                last.2 += 1.0;
            }
            _ => points.push((scores[i], labels[i] as f64, 1.0)),
        }
    }
    for p in points.iter_mut() {
        p.1 /= p.2;
    }

    // PAV: merge adjacent blocks while the means violate monotonicity
    struct Block {
        value: f64,
        weight: f64,
        len: usize,
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(points.len());
    for &(_, mean, weight) in &points {
        blocks.push(Block { value: mean, weight, len: 1 });
        while blocks.len() >= 2 {
            let last = blocks.len() - 1;
            if blocks[last - 1].value > blocks[last].value {
                let merged_w = blocks[last - 1].weight + blocks[last].weight;
                let merged_v = (blocks[last - 1].value * blocks[last - 1].weight
                    + blocks[last].value * blocks[last].weight)
                    / merged_w;
                blocks[last - 1] = Block {
                    value: merged_v,
                    weight: merged_w,
                    len: blocks[last - 1].len + blocks[last].len,
                };
                blocks.pop();
            } else {
                break;
            }
        }
    }

    let breakpoints: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut values = Vec::with_capacity(points.len());
    for b in &blocks {
        for _ in 0..b.len {
            values.push(b.value);
        }
    }
    Ok(IsotonicMap { breakpoints, values, n_cal: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monotone_means_are_returned_verbatim() {
        // per-score label means already nondecreasing: 0, 0.5, 1
        let scores = [0.1, 0.5, 0.5, 0.9];
        let labels = [0, 0, 1, 1];
        let map = fit_isotonic(&scores, &labels).unwrap();
        assert_eq!(map.breakpoints(), &[0.1, 0.5, 0.9]);
        assert_eq!(map.values(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn violating_sequence_pools_to_constant() {
        let map = fit_isotonic(&[0.1, 0.2, 0.3], &[1, 0, 0]).unwrap();
        for s in [0.05, 0.1, 0.2, 0.3, 0.9] {
            assert_abs_diff_eq!(map.apply(s), 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_values_nondecreasing_and_bounded() {
        let scores: Vec<f64> = (0..50).map(|i| ((i * 29) % 50) as f64 / 50.0).collect();
        let labels: Vec<usize> = (0..50).map(|i| ((i * 7) % 5 < 2) as usize).collect();
        let map = fit_isotonic(&scores, &labels).unwrap();
        for w in map.values().windows(2) {
            assert!(w[1] >= w[0]);
        }
        for v in map.values() {
            assert!((0.0..=1.0).contains(v));
        }
    }

    #[test]
    fn queries_clamp_and_take_left_step() {
        let map = fit_isotonic(&[0.2, 0.4, 0.8], &[0, 1, 1]).unwrap();
        assert_eq!(map.apply(0.0), map.apply(0.2)); // below range clamps
        assert_eq!(map.apply(0.3), map.apply(0.2)); // between takes left
        assert_eq!(map.apply(0.99), map.apply(0.8)); // above range clamps
    }

    #[test]
    fn single_item_is_constant() {
        let map = fit_isotonic(&[0.4], &[1]).unwrap();
        assert_eq!(map.apply(0.1), 1.0);
        assert_eq!(map.apply(0.9), 1.0);
    }
}
