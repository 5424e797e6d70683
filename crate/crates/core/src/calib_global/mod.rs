//! Global calibration maps `Φ: Δ_{K-1} → Δ_{K-1}`: Platt scaling,
//! temperature scaling, equal-mass histogram binning, and isotonic
//! regression.
//!
//! Binary problems conventionally use Platt scaling and multi-class
//! problems temperature scaling; histogram binning and isotonic regression
//! lift to multi-class by calibrating each marginal one-vs-rest and
//! renormalizing.

mod binning;
mod isotonic;
mod platt;
mod temperature;

pub use binning::{fit_histogram, HistogramMap, DEFAULT_HISTOGRAM_BINS};
pub use isotonic::{fit_isotonic, IsotonicMap};
pub use platt::{apply_platt, fit_platt, PlattMap};
pub use temperature::{apply_temperature, fit_temperature, TemperatureMap};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbMatrix;

/// A fitted map from a scalar score in `[0, 1]` to a calibrated scalar.
pub trait ScalarCalibration {
    fn apply_scalar(&self, score: f64) -> f64;
}

/// Applies one fitted binary map per class to the marginals of `p`, then
/// renormalizes. If every mapped entry is zero, returns the uniform
/// distribution.
pub fn apply_multiclass_marginal<M: ScalarCalibration>(maps: &[M], p: &[f64]) -> Result<Vec<f64>> {
    if maps.len() != p.len() {
        return Err(Error::invalid(format!(
            "apply_multiclass_marginal: {} maps for {} classes",
            maps.len(),
            p.len()
        )));
    }
    let mut out: Vec<f64> = maps
        .iter()
        .zip(p)
        .map(|(m, &v)| m.apply_scalar(v).clamp(0.0, 1.0))
        .collect();
    let sum: f64 = out.iter().sum();
    if sum <= 0.0 {
        let u = 1.0 / p.len() as f64;
        return Ok(vec![u; p.len()]);
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    Ok(out)
}

/// Which global calibrator to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalCalibratorKind {
    /// Platt for binary, temperature scaling otherwise.
    Auto,
    Platt,
    Temperature,
    Histogram,
    Isotonic,
}

/// A fitted global calibration map of any kind.
///
/// Histogram and isotonic maps hold one scalar map for binary problems
/// (applied to the positive-class score) or one per class for multi-class
/// (applied marginally, then renormalized).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CalibrationMap {
    Platt(PlattMap),
    Temperature(TemperatureMap),
    Histogram { maps: Vec<HistogramMap>, n_classes: usize },
    Isotonic { maps: Vec<IsotonicMap>, n_classes: usize },
}

impl CalibrationMap {
    /// Fits the requested map on calibration predictions and labels.
    pub fn fit(kind: GlobalCalibratorKind, probs: &ProbMatrix, labels: &[usize]) -> Result<Self> {
        if probs.n_rows() != labels.len() {
            return Err(Error::invalid("calibration probs and labels are misaligned"));
        }
        let k = probs.n_classes();
        let kind = match kind {
            GlobalCalibratorKind::Auto => {
                if k == 2 {
                    GlobalCalibratorKind::Platt
                } else {
                    GlobalCalibratorKind::Temperature
                }
            }
            other => other,
        };
        match kind {
            GlobalCalibratorKind::Platt => {
                if k != 2 {
                    return Err(Error::invalid("Platt scaling requires a binary problem"));
                }
                let scores: Vec<f64> = probs.rows().map(|r| r[1]).collect();
                Ok(CalibrationMap::Platt(fit_platt(&scores, labels)?))
            }
            GlobalCalibratorKind::Temperature => {
                Ok(CalibrationMap::Temperature(fit_temperature(probs, labels)?))
            }
            GlobalCalibratorKind::Histogram => {
                let maps = fit_marginal(probs, labels, |s, y| {
                    fit_histogram(s, y, DEFAULT_HISTOGRAM_BINS)
                })?;
                Ok(CalibrationMap::Histogram { maps, n_classes: k })
            }
            GlobalCalibratorKind::Isotonic => {
                let maps = fit_marginal(probs, labels, fit_isotonic)?;
                Ok(CalibrationMap::Isotonic { maps, n_classes: k })
            }
            GlobalCalibratorKind::Auto => unreachable!(),
        }
    }

    /// Calibrates one probability vector.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>> {
        match self {
            CalibrationMap::Platt(map) => {
                if p.len() != 2 {
                    return Err(Error::invalid("Platt map expects binary probabilities"));
                }
                let q = apply_platt(map, p[1]);
                Ok(vec![1.0 - q, q])
            }
            CalibrationMap::Temperature(map) => apply_temperature(map, p),
            CalibrationMap::Histogram { maps, n_classes } => apply_stack(maps, *n_classes, p),
            CalibrationMap::Isotonic { maps, n_classes } => apply_stack(maps, *n_classes, p),
        }
    }

    /// Calibrates every row of a prediction matrix.
    pub fn apply_matrix(&self, probs: &ProbMatrix) -> Result<ProbMatrix> {
        let rows: Vec<Vec<f64>> = probs.rows().map(|r| self.apply(r)).collect::<Result<_>>()?;
        Ok(ProbMatrix::from_rows_unchecked(rows, probs.n_classes()))
    }
}

fn fit_marginal<M>(
    probs: &ProbMatrix,
    labels: &[usize],
    fit: impl Fn(&[f64], &[usize]) -> Result<M>,
) -> Result<Vec<M>> {
    let k = probs.n_classes();
    if k == 2 {
        // binary: one map on the positive-class score
        let scores: Vec<f64> = probs.rows().map(|r| r[1]).collect();
        Ok(vec![fit(&scores, labels)?])
    } else {
        (0..k)
            .map(|c| {
                let scores: Vec<f64> = probs.rows().map(|r| r[c]).collect();
                let onevrest: Vec<usize> = labels.iter().map(|&y| usize::from(y == c)).collect();
                fit(&scores, &onevrest)
            })
            .collect()
    }
}

fn apply_stack<M: ScalarCalibration>(maps: &[M], n_classes: usize, p: &[f64]) -> Result<Vec<f64>> {
    if p.len() != n_classes {
        return Err(Error::invalid(format!(
            "map expects {n_classes} classes, got {}",
            p.len()
        )));
    }
    if n_classes == 2 && maps.len() == 1 {
        let q = maps[0].apply_scalar(p[1]).clamp(0.0, 1.0);
        Ok(vec![1.0 - q, q])
    } else {
        apply_multiclass_marginal(maps, p)
    }
}

/// Current calibration-map file format version.
pub const MAP_FORMAT_VERSION: u32 = 1;

/// JSON envelope for serialized calibration maps.
#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationMapFile {
    pub format_version: u32,
    /// Number of calibration items the map was fitted on.
    pub n_cal: usize,
    /// Seed of the pipeline that produced the calibration set, when known.
    pub seed: Option<u64>,
    pub map: CalibrationMap,
}

/// Writes a calibration map with fit metadata.
pub fn save_map(
    path: impl AsRef<Path>,
    map: &CalibrationMap,
    n_cal: usize,
    seed: Option<u64>,
) -> Result<()> {
    let file = CalibrationMapFile {
        format_version: MAP_FORMAT_VERSION,
        n_cal,
        seed,
        map: map.clone(),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Reads a calibration map written by [`save_map`].
pub fn load_map(path: impl AsRef<Path>) -> Result<CalibrationMapFile> {
    let text = std::fs::read_to_string(path)?;
    let file: CalibrationMapFile = serde_json::from_str(&text)?;
    if file.format_version != MAP_FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported map format version {}",
            file.format_version
        )));
    }
    Ok(file)
}
