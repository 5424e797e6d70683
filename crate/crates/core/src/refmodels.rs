//! Built-in reference classifiers: Gaussian naive Bayes and a multinomial
//! logistic model.

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;

/// Gaussian naive Bayes with maximum-likelihood per-class Gaussians,
/// class-frequency priors, and a relative variance floor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Per-class, per-feature means, row-major `K×d`.
    means: Vec<f64>,
    /// Per-class, per-feature variances (floored), row-major `K×d`.
    variances: Vec<f64>,
    /// Class priors, summing to 1.
    priors: Vec<f64>,
    n_features: usize,
    n_classes: usize,
}

/// Fits Gaussian naive Bayes. Every class must appear at least once.
///
/// Variances are floored at `1e-9 ×` the largest pooled feature variance so
/// constant features cannot produce a division by zero.
pub fn fit_gnb(train: &Dataset) -> Result<GaussianNb> {
    let n = train.len();
    let d = train.n_features();
    let k = train.n_classes();

    let mut class_counts = vec![0usize; k];
    for &y in train.labels() {
        class_counts[y] += 1;
    }
    if let Some(empty) = class_counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "fit_gnb: class {empty} has no training items"
        )));
    }

    let mut means = vec![0.0; k * d];
    for i in 0..n {
        let y = train.labels()[i];
        for (j, &v) in train.row(i).iter().enumerate() {
            means[y * d + j] += v;
        }
    }
    for (c, &count) in class_counts.iter().enumerate() {
        for j in 0..d {
            means[c * d + j] /= count as f64;
        }
    }

    let mut variances = vec![0.0; k * d];
    for i in 0..n {
        let y = train.labels()[i];
        for (j, &v) in train.row(i).iter().enumerate() {
            let diff = v - means[y * d + j];
            variances[y * d + j] += diff * diff;
        }
    }
    for (c, &count) in class_counts.iter().enumerate() {
        for j in 0..d {
            variances[c * d + j] /= count as f64;
        }
    }

    // pooled (whole-sample) variance per feature, for the floor
    let mut pooled_mean = vec![0.0; d];
    for i in 0..n {
        for (j, &v) in train.row(i).iter().enumerate() {
            pooled_mean[j] += v;
        }
    }
    for m in pooled_mean.iter_mut() {
        *m /= n as f64;
    }
    let mut max_pooled = 0.0f64;
    for j in 0..d {
        let mut var = 0.0;
        for i in 0..n {
            let diff = train.row(i)[j] - pooled_mean[j];
            var += diff * diff;
        }
        max_pooled = max_pooled.max(var / n as f64);
    }
    let floor = if max_pooled > 0.0 { 1e-9 * max_pooled } else { 1e-9 };
    for v in variances.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }

    let priors = class_counts
        .iter()
        .map(|&c| c as f64 / n as f64)
        .collect();

    Ok(GaussianNb {
        means,
        variances,
        priors,
        n_features: d,
        n_classes: k,
    })
}

impl GaussianNb {
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }
}

impl Classifier for GaussianNb {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Posterior `∝ prior × Π_f N(x_f; μ, σ²)`, normalized in log space.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        let d = self.n_features;
        let mut log_post = vec![0.0; self.n_classes];
        for (c, lp) in log_post.iter_mut().enumerate() {
            let mut acc = self.priors[c].ln();
            for (j, &v) in x.iter().enumerate() {
                let mean = self.means[c * d + j];
                let var = self.variances[c * d + j];
                let diff = v - mean;
                acc += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - diff * diff / (2.0 * var);
            }
            *lp = acc;
        }
        Ok(softmax_of_logs(&log_post))
    }
}

fn softmax_of_logs(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Multinomial logistic classifier fitted by L2-regularized maximum
/// likelihood.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearLogit {
    /// Weight matrix, row-major `K×d`.
    weights: Vec<f64>,
    /// Per-class bias (unregularized).
    bias: Vec<f64>,
    n_features: usize,
    n_classes: usize,
    /// Whether the gradient tolerance was reached within `max_iter`.
    pub converged: bool,
    /// Accepted optimizer iterations performed.
    pub n_iter: usize,
}

/// Fits multinomial logistic regression by full-batch gradient descent with
/// Armijo backtracking, minimizing mean NLL `+ l2/2·‖W‖²` (bias excluded
/// from the penalty). Stops when the gradient ∞-norm drops below `tol` or
/// after `max_iter` accepted steps; convergence status is reported on the
/// model.
pub fn fit_logit(train: &Dataset, l2: f64, max_iter: usize, tol: f64) -> Result<LinearLogit> {
    let n = train.len();
    let d = train.n_features();
    let k = train.n_classes();
    if n < k {
        return Err(Error::invalid(format!(
            "fit_logit: need at least {k} items for {k} classes, got {n}"
        )));
    }
    if !l2.is_finite() || l2 < 0.0 {
        return Err(Error::invalid("fit_logit: l2 must be a nonnegative real"));
    }

    let mut weights = vec![0.0; k * d];
    let mut bias = vec![0.0; k];

    let objective = |w: &[f64], b: &[f64]| -> f64 {
        let mut nll = 0.0;
        let mut scores = vec![0.0; k];
        for i in 0..n {
            let x = train.row(i);
            for (c, s) in scores.iter_mut().enumerate() {
                let mut acc = b[c];
                for (j, &v) in x.iter().enumerate() {
                    acc += w[c * d + j] * v;
                }
                *s = acc;
            }
            let max = scores.iter().fold(f64::NEG_INFINITY, |a, &s| a.max(s));
            let log_sum = scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln() + max;
            nll += log_sum - scores[train.labels()[i]];
        }
        nll / n as f64 + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
    };

    let gradient = |w: &[f64], b: &[f64], gw: &mut [f64], gb: &mut [f64]| {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        let mut scores = vec![0.0; k];
        for i in 0..n {
            let x = train.row(i);
            for (c, s) in scores.iter_mut().enumerate() {
                let mut acc = b[c];
                for (j, &v) in x.iter().enumerate() {
                    acc += w[c * d + j] * v;
                }
                *s = acc;
            }
            let probs = softmax_of_logs(&scores);
            for c in 0..k {
                let resid = probs[c] - if c == train.labels()[i] { 1.0 } else { 0.0 };
                gb[c] += resid;
                for (j, &v) in x.iter().enumerate() {
                    gw[c * d + j] += resid * v;
                }
            }
        }
        let inv = 1.0 / n as f64;
        for (g, &wv) in gw.iter_mut().zip(w.iter()) {
            *g = *g * inv + l2 * wv;
        }
        for g in gb.iter_mut() {
            *g *= inv;
        }
    };

    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let mut loss = objective(&weights, &bias);
    if !loss.is_finite() {
        return Err(Error::Numerical("fit_logit: non-finite initial loss".into()));
    }
    let mut step = 1.0f64;
    let mut converged = false;
    let mut n_iter = 0;
    for _ in 0..max_iter {
        gradient(&weights, &bias, &mut gw, &mut gb);
        let grad_inf = gw
            .iter()
            .chain(gb.iter())
            .fold(0.0f64, |a, &g| a.max(g.abs()));
        if grad_inf < tol {
            converged = true;
            break;
        }
        let grad_sq: f64 = gw.iter().map(|g| g * g).sum::<f64>() + gb.iter().map(|g| g * g).sum::<f64>();

        // Armijo backtracking keeps accepted losses monotonically decreasing.
        let mut accepted = false;
        for _ in 0..60 {
            let cand_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let cand_b: Vec<f64> = bias.iter().zip(&gb).map(|(b, g)| b - step * g).collect();
            let cand_loss = objective(&cand_w, &cand_b);
            if cand_loss.is_finite() && cand_loss <= loss - 1e-4 * step * grad_sq {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // step underflow: treat the current point as final
        }
        n_iter += 1;
        step = (step * 2.0).min(1e4);
    }
    if !loss.is_finite() {
        return Err(Error::Numerical("fit_logit: non-finite loss".into()));
    }

    Ok(LinearLogit {
        weights,
        bias,
        n_features: d,
        n_classes: k,
        converged,
        n_iter,
    })
}

impl LinearLogit {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }
}

impl Classifier for LinearLogit {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Softmax of the class scores `Wx + b`.
    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        let d = self.n_features;
        let scores: Vec<f64> = (0..self.n_classes)
            .map(|c| {
                let mut acc = self.bias[c];
                for (j, &v) in x.iter().enumerate() {
                    acc += self.weights[c * d + j] * v;
                }
                acc
            })
            .collect();
        Ok(softmax_of_logs(&scores))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dataset(features: Vec<f64>, d: usize, labels: Vec<usize>, k: usize) -> Dataset {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        Dataset::new(features, d, labels, k, ids).unwrap()
    }

    fn separated_1d(n_per_class: usize) -> Dataset {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n_per_class {
            xs.push(-3.0 + 0.01 * i as f64);
            ys.push(0);
            xs.push(3.0 + 0.01 * i as f64);
            ys.push(1);
        }
        dataset(xs, 1, ys, 2)
    }

    #[test]
    fn gnb_separated_classes_near_one_hot_at_centers() {
        let ds = separated_1d(50);
        let gnb = fit_gnb(&ds).unwrap();
        let p0 = gnb.predict_proba(&[-3.0]).unwrap();
        let p1 = gnb.predict_proba(&[3.0]).unwrap();
        assert!(p0[0] > 0.999);
        assert!(p1[1] > 0.999);
    }

    #[test]
    fn gnb_constant_feature_is_floored() {
        // second feature constant: no NaN, prediction driven by first feature
        let ds = dataset(
            vec![-1.0, 5.0, -1.1, 5.0, 1.0, 5.0, 1.1, 5.0],
            2,
            vec![0, 0, 1, 1],
            2,
        );
        let gnb = fit_gnb(&ds).unwrap();
        let p = gnb.predict_proba(&[-1.0, 5.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!(p[0] > 0.9);
    }

    #[test]
    fn gnb_balanced_priors_and_identical_classes_predict_priors() {
        // both classes share the same distribution: posterior = priors
        let ds = dataset(
            vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            1,
            vec![0, 1, 0, 1, 0, 1],
            2,
        );
        let gnb = fit_gnb(&ds).unwrap();
        assert_eq!(gnb.priors(), &[0.5, 0.5]);
        let p = gnb.predict_proba(&[0.5]).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn gnb_rejects_empty_class() {
        let ds = dataset(vec![0.0, 1.0], 1, vec![0, 0], 2);
        assert!(fit_gnb(&ds).is_err());
    }

    #[test]
    fn gnb_affine_rescaling_invariance() {
        let ds = dataset(
            vec![0.1, 2.0, 0.4, 2.2, 1.3, 0.3, 1.6, 0.1, 0.2, 1.9, 1.4, 0.5],
            2,
            vec![0, 0, 1, 1, 0, 1],
            2,
        );
        let gnb = fit_gnb(&ds).unwrap();
        let query = [0.7, 1.1];
        let p_orig = gnb.predict_proba(&query).unwrap();

        // rescale feature 0 by a=3, c=-1 and feature 1 by a=0.25, c=10
        let scale = [3.0, 0.25];
        let shift = [-1.0, 10.0];
        let mut feats = Vec::new();
        for i in 0..ds.len() {
            for (j, &v) in ds.row(i).iter().enumerate() {
                feats.push(v * scale[j] + shift[j]);
            }
        }
        let ds2 = dataset(feats, 2, ds.labels().to_vec(), 2);
        let gnb2 = fit_gnb(&ds2).unwrap();
        let query2: Vec<f64> = query
            .iter()
            .enumerate()
            .map(|(j, &v)| v * scale[j] + shift[j])
            .collect();
        let p_scaled = gnb2.predict_proba(&query2).unwrap();
        for (a, b) in p_orig.iter().zip(&p_scaled) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn logit_separable_data_classifies_training_set() {
        let ds = separated_1d(20);
        let model = fit_logit(&ds, 1e-3, 500, 1e-7).unwrap();
        for i in 0..ds.len() {
            let p = model.predict_proba(ds.row(i)).unwrap();
            let pred = if p[1] > p[0] { 1 } else { 0 };
            assert_eq!(pred, ds.labels()[i]);
        }
    }

    #[test]
    fn logit_strong_l2_shrinks_weights_toward_priors() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..30 {
            xs.push(i as f64 / 10.0);
            ys.push(usize::from(i < 20)); // 1/3 class 0, 2/3 class 1
        }
        let ds = dataset(xs, 1, ys, 2);
        let model = fit_logit(&ds, 100.0, 5000, 1e-9).unwrap();
        assert!(model.weights().iter().all(|w| w.abs() < 1e-2), "{:?}", model.weights());
        let p = model.predict_proba(&[1.5]).unwrap();
        assert_abs_diff_eq!(p[1], 2.0 / 3.0, epsilon = 2e-2);
    }

    #[test]
    fn logit_zero_weights_predict_uniform() {
        let model = LinearLogit {
            weights: vec![0.0; 6],
            bias: vec![0.0; 3],
            n_features: 2,
            n_classes: 3,
            converged: true,
            n_iter: 0,
        };
        let p = model.predict_proba(&[4.0, -7.0]).unwrap();
        for v in &p {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        // random-ish small problem; compare the analytic gradient used by the
        // optimizer against central finite differences of the objective
        let ds = dataset(
            vec![0.3, -1.2, 0.9, 0.4, -0.5, 1.5, 2.0, -0.3, -1.0, 0.8, 0.1, -0.6],
            2,
            vec![0, 1, 2, 0, 1, 2],
            3,
        );
        let l2 = 0.01;
        let n = ds.len();
        let (d, k) = (2usize, 3usize);
        let w0: Vec<f64> = (0..k * d).map(|i| ((i * 7 + 3) as f64 * 0.13).sin() * 0.5).collect();
        let b0: Vec<f64> = (0..k).map(|i| (i as f64 * 0.77).cos() * 0.2).collect();

        let objective = |w: &[f64], b: &[f64]| -> f64 {
            let mut nll = 0.0;
            for i in 0..n {
                let x = ds.row(i);
                let scores: Vec<f64> = (0..k)
                    .map(|c| b[c] + (0..d).map(|j| w[c * d + j] * x[j]).sum::<f64>())
                    .collect();
                let max = scores.iter().fold(f64::NEG_INFINITY, |a, &s| a.max(s));
                let log_sum = scores.iter().map(|&s| (s - max).exp()).sum::<f64>().ln() + max;
                nll += log_sum - scores[ds.labels()[i]];
            }
            nll / n as f64 + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
        };

        // analytic gradient (same formulas as the fitting routine)
        let mut gw = vec![0.0; k * d];
        let mut gb = vec![0.0; k];
        for i in 0..n {
            let x = ds.row(i);
            let scores: Vec<f64> = (0..k)
                .map(|c| b0[c] + (0..d).map(|j| w0[c * d + j] * x[j]).sum::<f64>())
                .collect();
            let probs = softmax_of_logs(&scores);
            for c in 0..k {
                let resid = probs[c] - if c == ds.labels()[i] { 1.0 } else { 0.0 };
                gb[c] += resid / n as f64;
                for j in 0..d {
                    gw[c * d + j] += resid * x[j] / n as f64;
                }
            }
        }
        for (g, &wv) in gw.iter_mut().zip(&w0) {
            *g += l2 * wv;
        }

        let h = 1e-6;
        for idx in 0..k * d {
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp[idx] += h;
            wm[idx] -= h;
            let fd = (objective(&wp, &b0) - objective(&wm, &b0)) / (2.0 * h);
            let rel = (gw[idx] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-5, "weight grad {idx}: analytic {} vs fd {fd}", gw[idx]);
        }
        for idx in 0..k {
            let mut bp = b0.clone();
            let mut bm = b0.clone();
            bp[idx] += h;
            bm[idx] -= h;
            let fd = (objective(&w0, &bp) - objective(&w0, &bm)) / (2.0 * h);
            let rel = (gb[idx] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-5, "bias grad {idx}: analytic {} vs fd {fd}", gb[idx]);
        }
    }

    #[test]
    fn probability_outputs_sum_to_one() {
        let ds = separated_1d(10);
        let gnb = fit_gnb(&ds).unwrap();
        let logit = fit_logit(&ds, 0.01, 200, 1e-8).unwrap();
        for x in [-5.0, -0.5, 0.0, 2.5, 9.0] {
            for p in [gnb.predict_proba(&[x]).unwrap(), logit.predict_proba(&[x]).unwrap()] {
                assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
            }
        }
    }
}
