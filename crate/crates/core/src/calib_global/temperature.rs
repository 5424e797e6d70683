//! Temperature scaling on logits recovered from probability outputs.
//!
//! Probabilities are clipped to `[ε, 1−ε]` and converted per class to
//! `z[k] = ln(p[k] / (1 − p[k]))`; the calibrated distribution is
//! `softmax(z / T)` with a single `T > 0` shared by all classes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbMatrix;

/// Clip constant for the probability-to-logit transform.
pub const LOGIT_EPS: f64 = 1e-12;

/// A fitted temperature map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TemperatureMap {
    /// Temperature; higher values flatten the distribution toward uniform.
    pub t: f64,
    /// Clip constant used by the logit transform.
    pub eps: f64,
    /// True when the optimizer stopped at an edge of the search bracket
    /// `[0.05, 20]`.
    pub at_bracket_edge: bool,
    /// Calibration items used for the fit.
    pub n_cal: usize,
}

/// Per-class logits of a clipped probability vector.
pub(crate) fn prob_to_logits(p: &[f64], eps: f64) -> Vec<f64> {
    p.iter()
        .map(|&v| {
            let c = v.clamp(eps, 1.0 - eps);
            (c / (1.0 - c)).ln()
        })
        .collect()
}

fn softmax_scaled(logits: &[f64], t: f64) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out: Vec<f64> = logits.iter().map(|&z| ((z - max) / t).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Applies the fitted temperature to one probability vector.
pub fn apply_temperature(map: &TemperatureMap, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() < 2 {
        return Err(Error::invalid("apply_temperature: need at least 2 classes"));
    }
    let logits = prob_to_logits(p, map.eps);
    Ok(softmax_scaled(&logits, map.t))
}

fn nll_at(logits: &[Vec<f64>], labels: &[usize], t: f64) -> f64 {
    let mut nll = 0.0;
    for (z, &y) in logits.iter().zip(labels) {
        let max = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_sum = z.iter().map(|&v| ((v - max) / t).exp()).sum::<f64>().ln();
        nll += log_sum - (z[y] - max) / t;
    }
    nll
}

const LN_T_LO: f64 = -2.995_732_273_553_991; // ln 0.05
const LN_T_HI: f64 = 2.995_732_273_553_991; // ln 20

/// Fits the temperature by golden-section search on `ln T ∈ [ln 0.05, ln 20]`
/// to tolerance 1e-6, minimizing the NLL of the rescaled predictions.
pub fn fit_temperature(probs: &ProbMatrix, labels: &[usize]) -> Result<TemperatureMap> {
    if probs.n_rows() != labels.len() || labels.is_empty() {
        return Err(Error::invalid("fit_temperature: probs and labels misaligned or empty"));
    }
    if probs.n_classes() < 2 {
        return Err(Error::invalid("fit_temperature: need at least 2 classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= probs.n_classes()) {
        return Err(Error::invalid(format!("fit_temperature: label {bad} out of range")));
    }
    let logits: Vec<Vec<f64>> = probs.rows().map(|r| prob_to_logits(r, LOGIT_EPS)).collect();

    // golden-section search on u = ln T
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = LN_T_LO;
    let mut hi = LN_T_HI;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = nll_at(&logits, labels, c.exp());
    let mut fd = nll_at(&logits, labels, d.exp());
    while hi - lo > 1e-6 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = nll_at(&logits, labels, c.exp());
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = nll_at(&logits, labels, d.exp());
        }
    }
    let t = (0.5 * (lo + hi)).exp();
    let at_bracket_edge = (lo - LN_T_LO).abs() < 1e-9 || (hi - LN_T_HI).abs() < 1e-9;
    Ok(TemperatureMap {
        t,
        eps: LOGIT_EPS,
        at_bracket_edge,
        n_cal: labels.len(),
    })
}
