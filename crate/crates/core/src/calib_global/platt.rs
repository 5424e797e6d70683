//! Platt scaling: `q = 1 / (1 + exp(A·p̂ + B))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ScalarCalibration;

/// Fitted Platt sigmoid parameters. `A < 0` gives a map that is strictly
/// increasing in the input score.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlattMap {
    pub a: f64,
    pub b: f64,
    /// Calibration items used for the fit.
    pub n_cal: usize,
}

/// Applies the fitted sigmoid to a positive-class score.
pub fn apply_platt(map: &PlattMap, score: f64) -> f64 {
    sigmoid_neg(map.a * score + map.b)
}

impl ScalarCalibration for PlattMap {
    fn apply_scalar(&self, score: f64) -> f64 {
        apply_platt(self, score)
    }
}

fn sigmoid_neg(z: f64) -> f64 {
    // 1 / (1 + e^z), computed stably for both signs of z
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Negative log-likelihood of Platt parameters against soft targets.
pub(crate) fn platt_nll(a: f64, b: f64, scores: &[f64], targets: &[f64]) -> f64 {
    let mut nll = 0.0;
    for (&s, &t) in scores.iter().zip(targets) {
        let z = a * s + b;
        // -[t ln q + (1-t) ln(1-q)] with q = 1/(1+e^z), written via
        // log1p(exp) for stability: ln q = -ln(1+e^z), ln(1-q) = z - ln(1+e^z)
        let log1pe = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        nll += t * log1pe + (1.0 - t) * (log1pe - z);
    }
    nll
}

/// Soft targets for positive/negative calibration items:
/// `y₊ = (n₊+1)/(n₊+2)`, `y₋ = 1/(n₋+2)`.
pub(crate) fn soft_targets(labels: &[usize]) -> Result<(f64, f64)> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid(
            "fit_platt: both classes must be present in the calibration set",
        ));
    }
    let y_pos = (n_pos as f64 + 1.0) / (n_pos as f64 + 2.0);
    let y_neg = 1.0 / (n_neg as f64 + 2.0);
    Ok((y_pos, y_neg))
}

/// Fits `(A, B)` by damped Newton iteration on the NLL against the soft
/// targets; converges when the parameter update ∞-norm drops below 1e-10 or
/// after 100 iterations. Labels must be 0/1 with both classes present.
pub fn fit_platt(scores: &[f64], labels: &[usize]) -> Result<PlattMap> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::invalid("fit_platt: scores and labels misaligned or empty"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("fit_platt: labels must be binary"));
    }
    let (y_pos, y_neg) = soft_targets(labels)?;
    let targets: Vec<f64> = labels
        .iter()
        .map(|&y| if y == 1 { y_pos } else { y_neg })
        .collect();

    let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let mut a = 0.0f64;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut nll = platt_nll(a, b, scores, &targets);

    for _ in 0..100 {
        // gradient and Hessian of the NLL in (a, b)
        let mut ga = 0.0;
        let mut gb = 0.0;
        let mut haa = 0.0;
        let mut hab = 0.0;
        let mut hbb = 0.0;
        for (&s, &t) in scores.iter().zip(&targets) {
            let q = sigmoid_neg(a * s + b);
            let diff = t - q;
            ga += diff * s;
            gb += diff;
            let w = (q * (1.0 - q)).max(1e-300);
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }

        // damped Newton: solve (H + λI) Δ = -g, halving the step until the
        // NLL decreases
        let mut lambda = 0.0f64;
        let (mut da, mut db);
        loop {
            let det = (haa + lambda) * (hbb + lambda) - hab * hab;
            if det.abs() > 1e-300 {
                da = -((hbb + lambda) * ga - hab * gb) / det;
                db = -((haa + lambda) * gb - hab * ga) / det;
                if da.is_finite() && db.is_finite() {
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-12 } else { lambda * 10.0 };
            if lambda > 1e6 {
                da = 0.0;
                db = 0.0;
                break;
            }
        }

        let mut scale = 1.0f64;
        let mut improved = false;
        for _ in 0..40 {
            let cand = platt_nll(a + scale * da, b + scale * db, scores, &targets);
            if cand <= nll {
                a += scale * da;
                b += scale * db;
                nll = cand;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
        if (scale * da).abs().max((scale * db).abs()) < 1e-10 {
            break;
        }
    }

    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical("fit_platt: parameters diverged".into()));
    }
    Ok(PlattMap { a, b, n_cal: scores.len() })
}
