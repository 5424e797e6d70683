//! Run configuration shared by all subcommands, and the master-seed
//! fan-out scheme.
//!
//! Seeds derive from the master seed through labelled counters
//! (`derive_seed(master, label, index)`), one label per consumer:
//!
//! - `"moons"` — synthetic dataset generation,
//! - `"trial", t` — per-trial root, from which each trial derives
//!   `"split"`, `"nested"`, `"model:<name>"`, `"rfprox", cal_size`, and
//!   `"hh", cal_size`,
//!
//! so adding or removing one calibrator never perturbs the randomness any
//! other consumer sees.

use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

/// Where the feature/label data comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Synthetic two-moons data generated at run time.
    Moons { n: usize, noise: f64 },
    /// A dataset CSV with header `id,f0,...,f{d-1},label`.
    Csv { path: PathBuf, label_column: String },
}

/// Where predicted probabilities come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSource {
    /// Fit one of the built-in reference classifiers on the train split.
    Builtin(BuiltinModel),
    /// Ingest an external model's predictions from a CSV with header
    /// `id,p0,...,p{K-1}`; rows must cover every test and calibration item.
    Predictions { path: PathBuf },
}

/// Built-in reference classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinModel {
    /// CART decision tree, `min_samples_leaf = 10`, unpruned.
    Dt,
    /// Random forest with 200 trees.
    Rf,
    /// Gaussian naive Bayes.
    Gnb,
    /// L2-regularized multinomial logistic model.
    Logit,
}

impl BuiltinModel {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinModel::Dt => "dt",
            BuiltinModel::Rf => "rf",
            BuiltinModel::Gnb => "gnb",
            BuiltinModel::Logit => "logit",
        }
    }
}

/// Calibration methods selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CalibratorKind {
    /// Platt scaling (binary only).
    Platt,
    /// Temperature scaling.
    Temp,
    /// Equal-mass histogram binning (100 bins).
    Hist,
    /// Isotonic regression.
    Isotonic,
    /// 10-nearest-neighbor similarity binning, unweighted.
    Sba10,
    /// 10-nearest-neighbor similarity binning, inverse-distance weighted.
    Sbaw10,
    /// Similarity-weighted calibration over the whole calibration set.
    Swc,
    /// SWC filtered by the per-item hidden-heterogeneity threshold.
    SwcHh,
}

impl CalibratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            CalibratorKind::Platt => "platt",
            CalibratorKind::Temp => "temp",
            CalibratorKind::Hist => "hist",
            CalibratorKind::Isotonic => "isotonic",
            CalibratorKind::Sba10 => "sba10",
            CalibratorKind::Sbaw10 => "sbaw10",
            CalibratorKind::Swc => "swc",
            CalibratorKind::SwcHh => "swc-hh",
        }
    }

    pub fn needs_hh(&self) -> bool {
        matches!(self, CalibratorKind::SwcHh)
    }

    pub fn is_local(&self) -> bool {
        matches!(
            self,
            CalibratorKind::Sba10 | CalibratorKind::Sbaw10 | CalibratorKind::Swc | CalibratorKind::SwcHh
        )
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSource,
    pub model: ModelSource,
    pub calibrators: Vec<CalibratorKind>,
    /// Hellinger neighborhood radius for the HH diagnostic.
    pub radius: f64,
    /// Master seed; everything else derives from it.
    pub seed: u64,
    pub trials: usize,
    /// Nested calibration set sizes (ascending). Empty means "use the whole
    /// calibration pool".
    pub cal_sizes: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    /// Fraction of test items rotated 90° CCW by `support --rotate-fraction`.
    pub rotate_fraction: Option<f64>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            bail!("radius must lie in (0, 1]");
        }
        if self.n_train == 0 || self.n_test == 0 {
            bail!("train and test sizes must be positive");
        }
        for w in self.cal_sizes.windows(2) {
            if w[1] <= w[0] {
                bail!("calibration sizes must be strictly ascending");
            }
        }
        if let Some(f) = self.rotate_fraction {
            if !(0.0..=1.0).contains(&f) {
                bail!("rotate-fraction must lie in [0, 1]");
            }
        }
        if self.calibrators.is_empty() {
            bail!("at least one calibrator is required");
        }
        Ok(())
    }

    /// Root seed of one trial.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        swcal::rng::derive_seed(self.seed, "trial", trial as u64)
    }
}
